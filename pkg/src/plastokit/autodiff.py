"""Differentiation engine: forward-mode duals and a reverse-mode tape.

Three number-like types flow through the same generic arithmetic:

* plain numpy arrays / floats (no derivatives),
* :class:`Dual` -- forward mode with a fixed-width block of directional
  derivatives (used for the small return-map Jacobians),
* :class:`Var` -- nodes on a reverse-mode :class:`Tape` (used for the
  training-loss gradients, via vector-Jacobian products).

Physics code is written once against the helper functions at the bottom of
this module (``exp``, ``log``, ``sqrt``, ``value_of``, ``matvec``, ...) and
works with any of the three types.  Second directional derivatives are
available through :class:`Dual2` (truncated bi-dual arithmetic).
"""

from __future__ import annotations

import numpy as np

from .errors import NonFinite

_NUMBER = (int, float, np.integer, np.floating, np.ndarray)


# ---------------------------------------------------------------------------
# forward mode
# ---------------------------------------------------------------------------

class Dual:
    """Value plus a fixed-width block of directional derivatives.

    ``val`` has shape ``S`` and ``tan`` has shape ``S + (k,)`` where ``k`` is
    the number of seed directions.  Arithmetic follows the chain rule exactly.
    """

    __slots__ = ("val", "tan")

    # keep numpy from absorbing us into object arrays: binary ops with
    # ndarrays must dispatch to our reflected operators
    __array_ufunc__ = None

    def __init__(self, val, tan):
        self.val = val
        self.tan = tan

    @staticmethod
    def seed(x, width=None):
        """Lift a flat vector ``x`` to a Dual seeded with the identity."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if width is None:
            width = n
        tan = np.zeros(x.shape + (width,))
        for i in range(min(n, width)):
            tan[i, i] = 1.0
        return Dual(x, tan)

    # -- helpers ------------------------------------------------------------

    def _v(self, other):
        if isinstance(other, Dual):
            return other.val, other.tan
        return other, None

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.tan[idx])

    @property
    def shape(self):
        return np.shape(self.val)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        ov, ot = self._v(other)
        if ot is None:
            v = self.val + ov
            return Dual(v, _fit(self.tan, v))
        return Dual(self.val + ov, self.tan + ot)

    __radd__ = __add__

    def __sub__(self, other):
        ov, ot = self._v(other)
        if ot is None:
            v = self.val - ov
            return Dual(v, _fit(self.tan, v))
        return Dual(self.val - ov, self.tan - ot)

    def __rsub__(self, other):
        v = other - self.val
        return Dual(v, _fit(-self.tan, v))

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __mul__(self, other):
        ov, ot = self._v(other)
        if ot is None:
            return Dual(self.val * ov, self.tan * _col(ov))
        return Dual(self.val * ov, self.tan * _col(ov) + ot * _col(self.val))

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov, ot = self._v(other)
        inv = 1.0 / ov
        if ot is None:
            return Dual(self.val * inv, self.tan * _col(inv))
        v = self.val * inv
        return Dual(v, (self.tan - ot * _col(v)) * _col(inv))

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        v = other * inv
        return Dual(v, -self.tan * _col(v * inv))

    def __pow__(self, p):
        v = self.val ** p
        return Dual(v, self.tan * _col(p * self.val ** (p - 1.0)))


def _col(v):
    """Append a trailing axis so values broadcast against tangent blocks."""
    if np.shape(v) == ():
        return v
    return np.asarray(v)[..., None]


def _fit(tan, val):
    """Broadcast a tangent block to match a (possibly broadcast) value."""
    want = np.shape(val) + tan.shape[-1:]
    if tan.shape == want:
        return tan
    return np.broadcast_to(tan, want)


# ---------------------------------------------------------------------------
# second directional derivatives (bi-dual arithmetic)
# ---------------------------------------------------------------------------

class Dual2:
    """Truncated bi-dual number carrying (value, d_u, d_v, d_u d_v)."""

    __slots__ = ("a", "b", "c", "d")

    __array_ufunc__ = None

    def __init__(self, a, b=0.0, c=0.0, d=0.0):
        self.a, self.b, self.c, self.d = a, b, c, d

    def _parts(self, other):
        if isinstance(other, Dual2):
            return other.a, other.b, other.c, other.d
        return other, 0.0, 0.0, 0.0

    def __add__(self, other):
        a, b, c, d = self._parts(other)
        return Dual2(self.a + a, self.b + b, self.c + c, self.d + d)

    __radd__ = __add__

    def __sub__(self, other):
        a, b, c, d = self._parts(other)
        return Dual2(self.a - a, self.b - b, self.c - c, self.d - d)

    def __rsub__(self, other):
        a, b, c, d = self._parts(other)
        return Dual2(a - self.a, b - self.b, c - self.c, d - self.d)

    def __neg__(self):
        return Dual2(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, other):
        a, b, c, d = self._parts(other)
        return Dual2(self.a * a,
                     self.a * b + self.b * a,
                     self.a * c + self.c * a,
                     self.a * d + self.d * a + self.b * c + self.c * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b, c, d = self._parts(other)
        return self * Dual2(a, b, c, d)._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        ia = 1.0 / self.a
        return self._chain(ia, -ia * ia, 2.0 * ia * ia * ia)

    def __pow__(self, p):
        return self._chain(self.a ** p, p * self.a ** (p - 1.0),
                           p * (p - 1.0) * self.a ** (p - 2.0))

    def _chain(self, f, fp, fpp):
        """Compose with a scalar function given f(a), f'(a), f''(a)."""
        return Dual2(f, fp * self.b, fp * self.c,
                     fp * self.d + fpp * self.b * self.c)


# ---------------------------------------------------------------------------
# reverse mode
# ---------------------------------------------------------------------------

class Tape:
    """Record of primitive operations supporting replay and backward passes.

    Each node stores the parent indices, a vjp closure and a forward closure;
    replaying the forward closures reproduces every recorded value bit-exactly
    (same primitives in the same order).
    """

    def __init__(self):
        self.vals = []      # primal value per node
        self.parents = []   # tuple of parent node indices
        self.vjps = []      # callable(grad_out) -> tuple of parent grads
        self.fwds = []      # callable(*parent_vals) -> value (None for leaves)

    def leaf(self, value):
        value = np.asarray(value, dtype=float)
        idx = self._push(value, (), None, None)
        return Var(value, self, idx)

    def _push(self, val, parents, vjp, fwd):
        self.vals.append(val)
        self.parents.append(parents)
        self.vjps.append(vjp)
        self.fwds.append(fwd)
        return len(self.vals) - 1

    def backward(self, out, seed):
        """Accumulate d(out . seed)/d(leaf) for every node; returns grad list."""
        grads = [None] * len(self.vals)
        grads[out.idx] = np.asarray(seed, dtype=float)
        for idx in range(out.idx, -1, -1):
            g = grads[idx]
            if g is None or self.vjps[idx] is None:
                continue
            for pidx, pg in zip(self.parents[idx], self.vjps[idx](g)):
                if pg is None:
                    continue
                if grads[pidx] is None:
                    grads[pidx] = np.array(pg, dtype=float)
                else:
                    grads[pidx] = grads[pidx] + pg
        return grads

    def replay(self):
        """Re-execute every recorded primitive; returns the recomputed values."""
        vals = list(self.vals)
        for idx, fwd in enumerate(self.fwds):
            if fwd is not None:
                vals[idx] = fwd(*[vals[p] for p in self.parents[idx]])
        return vals


class Var:
    """A value recorded on a :class:`Tape`."""

    __slots__ = ("val", "tape", "idx")

    __array_ufunc__ = None

    def __init__(self, val, tape, idx):
        self.val = val
        self.tape = tape
        self.idx = idx

    def _lift(self, other):
        if isinstance(other, Var):
            return other
        return None

    def _node(self, val, parents, vjp, fwd):
        idx = self.tape._push(val, tuple(p.idx for p in parents), vjp, fwd)
        return Var(val, self.tape, idx)

    @property
    def shape(self):
        return np.shape(self.val)

    def __getitem__(self, idx):
        def vjp(g):
            out = np.zeros(np.shape(self.val))
            out[idx] = g
            return (out,)
        return self._node(self.val[idx], (self,), vjp, lambda a: a[idx])

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return self._node(self.val + other, (self,),
                              lambda g: (_unbroadcast(g, self.shape),),
                              lambda a: a + other)
        return self._node(self.val + o.val, (self, o),
                          lambda g: (_unbroadcast(g, self.shape),
                                     _unbroadcast(g, o.shape)),
                          lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self.__add__(-other if isinstance(other, Var) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        return self._node(-self.val, (self,), lambda g: (-g,), lambda a: -a)

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return self._node(self.val * other, (self,),
                              lambda g: (_unbroadcast(g * other, self.shape),),
                              lambda a: a * other)
        return self._node(self.val * o.val, (self, o),
                          lambda g: (_unbroadcast(g * o.val, self.shape),
                                     _unbroadcast(g * self.val, o.shape)),
                          lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return self.__mul__(1.0 / np.asarray(other))
        v = self.val / o.val
        return self._node(v, (self, o),
                          lambda g: (_unbroadcast(g / o.val, self.shape),
                                     _unbroadcast(-g * v / o.val, o.shape)),
                          lambda a, b: a / b)

    def __rtruediv__(self, other):
        v = other / self.val
        return self._node(v, (self,),
                          lambda g: (_unbroadcast(-g * v / self.val, self.shape),),
                          lambda a: other / a)

    def __pow__(self, p):
        v = self.val ** p
        return self._node(v, (self,),
                          lambda g: (g * p * self.val ** (p - 1.0),),
                          lambda a: a ** p)


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to ``shape``."""
    grad = np.asarray(grad)
    if grad.shape == tuple(shape):
        return grad
    if shape == ():
        return grad.sum()
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# generic math helpers
# ---------------------------------------------------------------------------

def value_of(x):
    """Peek at the primal value of any generic number."""
    if isinstance(x, Dual):
        return x.val
    if isinstance(x, Var):
        return x.val
    if isinstance(x, Dual2):
        return x.a
    return x


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, x.tan * _col(e))
    if isinstance(x, Var):
        e = np.exp(x.val)
        return x._node(e, (x,), lambda g: (g * e,), np.exp)
    if isinstance(x, Dual2):
        e = np.exp(x.a)
        return x._chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.val), x.tan * _col(1.0 / x.val))
    if isinstance(x, Var):
        return x._node(np.log(x.val), (x,), lambda g: (g / x.val,), np.log)
    if isinstance(x, Dual2):
        ia = 1.0 / x.a
        return x._chain(np.log(x.a), ia, -ia * ia)
    return np.log(x)


def log1p(x):
    if isinstance(x, Dual):
        return Dual(np.log1p(x.val), x.tan * _col(1.0 / (1.0 + x.val)))
    if isinstance(x, Var):
        return x._node(np.log1p(x.val), (x,),
                       lambda g: (g / (1.0 + x.val),), np.log1p)
    if isinstance(x, Dual2):
        ia = 1.0 / (1.0 + x.a)
        return x._chain(np.log1p(x.a), ia, -ia * ia)
    return np.log1p(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = np.sqrt(x.val)
        return Dual(s, x.tan * _col(0.5 / s))
    if isinstance(x, Var):
        s = np.sqrt(x.val)
        return x._node(s, (x,), lambda g: (g * 0.5 / s,), np.sqrt)
    if isinstance(x, Dual2):
        s = np.sqrt(x.a)
        return x._chain(s, 0.5 / s, -0.25 / (s * x.a))
    return np.sqrt(x)


def where(mask, a, b):
    """Elementwise select with a constant boolean mask.

    Gradients flow through the selected branch only, so dead branches may
    hold non-finite values without contaminating the result.
    """
    mask = np.asarray(mask)
    av, bv = value_of(a), value_of(b)
    if isinstance(a, Var) or isinstance(b, Var):
        tape = a.tape if isinstance(a, Var) else b.tape
        a = a if isinstance(a, Var) else tape.leaf(np.broadcast_to(np.asarray(a, dtype=float), mask.shape).copy() if np.shape(a) != mask.shape else a)
        b = b if isinstance(b, Var) else tape.leaf(np.broadcast_to(np.asarray(b, dtype=float), mask.shape).copy() if np.shape(b) != mask.shape else b)
        val = np.where(mask, a.val, b.val)

        def vjp(g):
            return (_unbroadcast(np.where(mask, g, 0.0), a.shape),
                    _unbroadcast(np.where(mask, 0.0, g), b.shape))

        idx = tape._push(val, (a.idx, b.idx), vjp,
                         lambda x, y: np.where(mask, x, y))
        return Var(val, tape, idx)
    if isinstance(a, Dual) or isinstance(b, Dual):
        width = a.tan.shape[-1] if isinstance(a, Dual) else b.tan.shape[-1]
        at = a.tan if isinstance(a, Dual) else np.zeros(np.shape(av) + (width,))
        bt = b.tan if isinstance(b, Dual) else np.zeros(np.shape(bv) + (width,))
        val = np.where(mask, av, bv)
        tan = np.where(mask[..., None], _fit(at, np.broadcast_to(av, val.shape) if np.shape(av) != val.shape else av),
                       _fit(bt, np.broadcast_to(bv, val.shape) if np.shape(bv) != val.shape else bv))
        return Dual(val, tan)
    return np.where(mask, av, bv)


def clip_above(x, hi):
    """min(x, hi) with zero derivative past the cap (dead-lane guard)."""
    return where(np.asarray(value_of(x)) > hi, hi + 0.0 * x, x)


def clip_below(x, lo):
    """max(x, lo) with zero derivative past the cap (dead-lane guard)."""
    return where(np.asarray(value_of(x)) < lo, lo + 0.0 * x, x)


def asum(x):
    """Sum all entries of a generic vector to a scalar."""
    if isinstance(x, Dual):
        return Dual(np.sum(x.val), np.sum(x.tan, axis=0))
    if isinstance(x, Var):
        return x._node(np.sum(x.val), (x,),
                       lambda g: (np.full(np.shape(x.val), g),), np.sum)
    return np.sum(x)


def matvec(A, x):
    """Constant matrix times a generic vector."""
    A = np.asarray(A, dtype=float)
    if isinstance(x, Dual):
        return Dual(A @ x.val, A @ x.tan)
    if isinstance(x, Var):
        return x._node(A @ x.val, (x,), lambda g: (A.T @ g,), lambda v: A @ v)
    return A @ x


def gemv(A, x):
    """Matrix-vector product where either factor may carry derivatives."""
    if isinstance(A, Var):
        if isinstance(x, Var):
            val = A.val @ x.val

            def vjp(g):
                return (np.outer(g, x.val), A.val.T @ g)

            idx = A.tape._push(val, (A.idx, x.idx), vjp, lambda a, b: a @ b)
            return Var(val, A.tape, idx)
        xv = np.asarray(x, dtype=float)
        return A._node(A.val @ xv, (A,), lambda g: (np.outer(g, xv),),
                       lambda a: a @ xv)
    if isinstance(A, Dual):
        raise TypeError("gemv does not support Dual-valued matrices")
    return matvec(A, x)


def concat(parts):
    """Concatenate generic scalars/vectors into one generic vector."""
    if any(isinstance(p, Var) for p in parts):
        tape = next(p.tape for p in parts if isinstance(p, Var))
        parts = [p if isinstance(p, Var) else tape.leaf(np.atleast_1d(np.asarray(p, dtype=float)))
                 for p in parts]
        parts = [p if np.ndim(p.val) else _promote_var(p) for p in parts]
        sizes = [p.val.shape[0] for p in parts]
        val = np.concatenate([p.val for p in parts])

        def vjp(g):
            out, off = [], 0
            for n in sizes:
                out.append(g[off:off + n])
                off += n
            return tuple(out)

        idx = tape._push(val, tuple(p.idx for p in parts), vjp,
                         lambda *vs: np.concatenate(vs))
        return Var(val, tape, idx)
    if any(isinstance(p, Dual) for p in parts):
        width = next(p.tan.shape[-1] for p in parts if isinstance(p, Dual))
        vals, tans = [], []
        for p in parts:
            if not isinstance(p, Dual):
                v = np.atleast_1d(np.asarray(p, dtype=float))
                vals.append(v)
                tans.append(np.zeros(v.shape + (width,)))
            else:
                v = np.atleast_1d(p.val)
                vals.append(v)
                tans.append(p.tan.reshape(v.shape + (width,)))
        return Dual(np.concatenate(vals), np.concatenate(tans, axis=0))
    return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


def _promote_var(p):
    val = np.atleast_1d(p.val)
    return p._node(val, (p,), lambda g: (g.reshape(np.shape(p.val)),),
                   np.atleast_1d)


# ---------------------------------------------------------------------------
# user-facing derivative drivers
# ---------------------------------------------------------------------------

def grad(f, x):
    """Gradient of a scalar function of a flat parameter vector.

    Raises :class:`NonFinite` if the forward value is NaN/Inf.
    """
    x = np.asarray(x, dtype=float)
    tape = Tape()
    xv = tape.leaf(x)
    y = f(xv)
    yval = value_of(y)
    if not np.all(np.isfinite(yval)):
        raise NonFinite("forward pass produced a non-finite value")
    grads = tape.backward(y, 1.0)
    g = grads[xv.idx]
    return np.zeros_like(x) if g is None else np.asarray(g, dtype=float)


def jacobian(F, x):
    """Dense Jacobian of a vector function via forward-mode duals."""
    x = np.asarray(x, dtype=float)
    out = F(Dual.seed(x))
    if not isinstance(out, Dual):
        return np.zeros((np.shape(out)[0] if np.ndim(out) else 1, x.shape[0]))
    val = out.val
    if not np.all(np.isfinite(val)):
        raise NonFinite("forward pass produced a non-finite value")
    return np.atleast_2d(out.tan)


def second_derivative(f, x, dir1, dir2):
    """Directional second derivative  dir1^T H(f) dir2  at ``x``."""
    x = np.asarray(x, dtype=float)
    dir1 = np.asarray(dir1, dtype=float)
    dir2 = np.asarray(dir2, dtype=float)
    xs = [Dual2(x[i], dir1[i], dir2[i], 0.0) for i in range(x.shape[0])]
    out = f(xs)
    if not np.isfinite(out.a):
        raise NonFinite("forward pass produced a non-finite value")
    return out.d
