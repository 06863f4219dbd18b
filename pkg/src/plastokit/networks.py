"""Constraint-preserving feedforward networks for the hardening models.

Three flavors, each a plain feedforward net with non-negative weights and
biases plus parameterized activations applied per hidden layer:

* ``positive``                    -- scalable logistic activations,
* ``positive-monotone``           -- scalable logistic activations,
* ``positive-monotone-convex``    -- parameterized Softplus activations.

With non-negative inputs these give (by construction) non-negative outputs,
non-negative first derivatives and, for the convex flavor, non-negative
second derivatives.  The hardening wrappers add the output corrections that
pin R(0) = 1 and phi(0) = 0 exactly.

Evaluation code is generic over the autodiff number types, so network
outputs can sit inside differentiated return-map residuals.
"""

from __future__ import annotations

import json

import numpy as np

from . import autodiff as ad
from .errors import ConstraintViolation

POSITIVE = "positive"
POSITIVE_MONOTONE = "positive-monotone"
POSITIVE_MONOTONE_CONVEX = "positive-monotone-convex"

_FLAVORS = (POSITIVE, POSITIVE_MONOTONE, POSITIVE_MONOTONE_CONVEX)

#: clamping floors used by the training-time projection
WEIGHT_FLOOR = 0.0
ACTIVATION_FLOOR = 1e-6

_RECIP_GUARD = 1e-12


# ---------------------------------------------------------------------------
# scalable activations
# ---------------------------------------------------------------------------

def softplus_param(x, beta):
    """(1/beta) log(1 + beta exp(x)); convex, positive, increasing on x >= 0.

    Uses the exact rearrangement x + log(beta + exp(-x)) on the large-x side
    so no overflow can occur.
    """
    big = np.asarray(ad.value_of(x)) > 30.0
    lo = ad.log1p(beta * ad.exp(ad.clip_above(x, 30.0)))
    hi = ad.clip_below(x, 0.0) + ad.log(beta + ad.exp(-ad.clip_below(x, 0.0)))
    return ad.where(big, hi, lo) / beta


def softplus_d1(x, beta):
    """First derivative e^x / (1 + beta e^x) = 1 / (e^-x + beta)."""
    neg = np.asarray(ad.value_of(x)) < 0.0
    ex = ad.exp(ad.clip_above(x, 0.0))
    lo = ex / (1.0 + beta * ex)
    hi = 1.0 / (ad.exp(-ad.clip_below(x, 0.0)) + beta)
    return ad.where(neg, lo, hi)


def softplus_d2(x, beta):
    """Second derivative e^-x / (e^-x + beta)^2 (>= 0: convexity)."""
    neg = np.asarray(ad.value_of(x)) < 0.0
    ex = ad.exp(ad.clip_above(x, 0.0))
    lo = ex / (1.0 + beta * ex) ** 2
    emx = ad.exp(-ad.clip_below(x, 0.0))
    hi = emx / (emx + beta) ** 2
    return ad.where(neg, lo, hi)


def logistic_param(x, beta1, beta2):
    """1 / (1 + exp(-beta1 (x - beta2))); positive with positive derivative."""
    z = beta1 * (x - beta2)
    neg = np.asarray(ad.value_of(z)) < 0.0
    ez = ad.exp(ad.clip_above(z, 0.0))
    lo = ez / (1.0 + ez)
    hi = 1.0 / (1.0 + ad.exp(-ad.clip_below(z, 0.0)))
    return ad.where(neg, lo, hi)


def logistic_d1(x, beta1, beta2):
    """d/dx logistic = beta1 s (1 - s)."""
    s = logistic_param(x, beta1, beta2)
    return beta1 * s * (1.0 - s)


def logistic_d2(x, beta1, beta2):
    """d2/dx2 logistic = beta1^2 s (1 - s)(1 - 2 s)."""
    s = logistic_param(x, beta1, beta2)
    return beta1 * beta1 * s * (1.0 - s) * (1.0 - 2.0 * s)


def _softplus_table(zv, beta, upto):
    """Stable [value, d1, d2, d3] arrays of the Softplus at plain inputs."""
    pos = zv >= 0.0
    e = np.exp(np.where(pos, -zv, zv))      # exp(-|z|), never overflows
    out = [np.where(pos, (zv + np.log(beta + e)) / beta,
                    np.log1p(beta * e) / beta)]
    if upto >= 1:
        out.append(np.where(pos, 1.0 / (e + beta), e / (1.0 + beta * e)))
    if upto >= 2:
        out.append(np.where(pos, e / (e + beta) ** 2,
                            e / (1.0 + beta * e) ** 2))
    if upto >= 3:
        out.append(np.where(pos, e * (e - beta) / (e + beta) ** 3,
                            e * (1.0 - beta * e) / (1.0 + beta * e) ** 3))
    return out


def _logistic_table(zv, beta1, beta2, upto):
    """Stable [value, d1, d2, d3] arrays of the scalable logistic."""
    t = beta1 * (zv - beta2)
    pos = t >= 0.0
    e = np.exp(np.where(pos, -t, t))
    s = np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))
    out = [s]
    if upto >= 1:
        out.append(beta1 * s * (1.0 - s))
    if upto >= 2:
        out.append(beta1 ** 2 * s * (1.0 - s) * (1.0 - 2.0 * s))
    if upto >= 3:
        out.append(beta1 ** 3 * s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s))
    return out


# ---------------------------------------------------------------------------
# the network
# ---------------------------------------------------------------------------

class ConstrainedNet:
    """Scalar-to-scalar feedforward net with non-negative parameters.

    Parameters live in ``weights``/``biases`` (one pair per layer, the last
    one linear) and ``act_params`` (one list per hidden layer: ``[beta]``
    for Softplus, ``[beta1, beta2]`` for the logistic).  ``enforce=False``
    turns the net into the unconstrained ablation variant: same topology,
    signed parameters allowed, constraints no longer guaranteed.
    """

    def __init__(self, flavor, weights, biases, act_params, input_scale=1.0,
                 enforce=True):
        if flavor not in _FLAVORS:
            raise ValueError(f"unknown flavor {flavor!r}")
        self.flavor = flavor
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.act_params = [np.asarray(p, dtype=float) for p in act_params]
        self.input_scale = float(input_scale)
        self.enforce = bool(enforce)

    # -- structure ----------------------------------------------------------

    @property
    def n_hidden_layers(self):
        return len(self.weights) - 1

    def n_parameters(self):
        n = sum(w.size for w in self.weights) + sum(b.size for b in self.biases)
        return n + sum(p.size for p in self.act_params)

    def parameters(self):
        """Named parameter arrays (shared references, not copies)."""
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        for i, p in enumerate(self.act_params):
            out[f"act{i}"] = p
        return out

    def validate(self):
        """Raise :class:`ConstraintViolation` on out-of-bound parameters."""
        if not self.enforce:
            return
        for w in self.weights:
            if np.any(w < 0.0):
                raise ConstraintViolation("negative weight in constrained net")
        for b in self.biases:
            if np.any(b < 0.0):
                raise ConstraintViolation("negative bias in constrained net")
        for p in self.act_params:
            if np.any(p <= 0.0):
                raise ConstraintViolation("non-positive activation parameter")

    def project(self):
        """Clamp parameters back onto the admissible set (post-optimizer)."""
        if not self.enforce:
            for p in self.act_params:
                np.maximum(p, ACTIVATION_FLOOR, out=p)
            return
        for w in self.weights:
            np.maximum(w, WEIGHT_FLOOR, out=w)
        for b in self.biases:
            np.maximum(b, WEIGHT_FLOOR, out=b)
        for p in self.act_params:
            np.maximum(p, ACTIVATION_FLOOR, out=p)

    # -- evaluation -----------------------------------------------------------

    def _activation(self, z, params, order):
        if self.flavor == POSITIVE_MONOTONE_CONVEX:
            beta = params[0]
            if order == 0:
                return softplus_param(z, beta)
            if order == 1:
                return softplus_d1(z, beta)
            return softplus_d2(z, beta)
        beta1, beta2 = params[0], params[1]
        if order == 0:
            return logistic_param(z, beta1, beta2)
        if order == 1:
            return logistic_d1(z, beta1, beta2)
        return logistic_d2(z, beta1, beta2)

    def _act_pack(self, z, params, order):
        """(sigma, sigma', sigma'') of one layer, fused for float/Dual z.

        ``z`` carrying Dual tangents needs one extra derivative level to
        chain through; the Var (tape) path falls back to the generic ops.
        """
        if isinstance(z, ad.Var) or any(isinstance(q, ad.Var) for q in params):
            return tuple(self._activation(z, params, k) if k <= order else None
                         for k in range(3))
        dual = isinstance(z, ad.Dual)
        zv = z.val if dual else np.asarray(z, dtype=float)
        upto = order + (1 if dual else 0)
        if self.flavor == POSITIVE_MONOTONE_CONVEX:
            f = _softplus_table(zv, float(params[0]), upto)
        else:
            f = _logistic_table(zv, float(params[0]), float(params[1]), upto)
        if not dual:
            return tuple(f[k] if k <= order else None for k in range(3))
        out = []
        for k in range(3):
            if k > order:
                out.append(None)
            else:
                out.append(ad.Dual(f[k], f[k + 1][..., None] * z.tan))
        return tuple(out)

    def eval_with_derivatives(self, x, order=2, params=None):
        """Value and first/second input-derivatives in one forward pass.

        The chain rule is accumulated layer by layer (scalar input), so the
        returned derivatives are exact closed-form expressions.  ``params``
        may override the stored parameter dict (used for taped gradients).
        """
        p = self.parameters() if params is None else params
        h = x * self.input_scale
        d = self.input_scale
        dd = 0.0
        L = self.n_hidden_layers
        for i in range(L):
            W, b = p[f"W{i}"], p[f"b{i}"]
            ap = p[f"act{i}"]
            z = _affine(W, h, b, first=(i == 0))
            s0, s1, s2 = self._act_pack(z, ap, order)
            h = s0
            if order >= 1:
                dz = _linmap(W, d, first=(i == 0))
                if order >= 2:
                    ddz = _linmap(W, dd, first=(i == 0))
                    dd = s2 * dz * dz + s1 * ddz
                d = s1 * dz
        W, b = p[f"W{L}"], p[f"b{L}"]
        y = _affine(W, h, b)[0]
        dy = _linmap(W, d)[0] if order >= 1 else 0.0
        ddy = _linmap(W, dd)[0] if order >= 2 else 0.0
        return y, dy, ddy

    def __call__(self, x):
        return self.eval_with_derivatives(x, order=0)[0]

    # -- serialization --------------------------------------------------------

    def to_json_dict(self):
        layers = []
        for i in range(len(self.weights)):
            layers.append({
                "W": self.weights[i].tolist(),
                "b": self.biases[i].tolist(),
                "activation_params": self.act_params[i].tolist()
                if i < len(self.act_params) else [],
            })
        return {"flavor": self.flavor, "enforce": self.enforce,
                "layers": layers, "input_scale": self.input_scale}

    @classmethod
    def from_json_dict(cls, d):
        weights = [np.asarray(l["W"], dtype=float) for l in d["layers"]]
        biases = [np.asarray(l["b"], dtype=float) for l in d["layers"]]
        acts = [np.asarray(l["activation_params"], dtype=float)
                for l in d["layers"] if l["activation_params"]]
        return cls(d["flavor"], weights, biases, acts,
                   input_scale=d.get("input_scale", 1.0),
                   enforce=d.get("enforce", True))

    def dumps(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, s):
        return cls.from_json_dict(json.loads(s))


def _affine(W, h, b, first=False):
    """W h + b; the weights themselves may carry derivatives (tape mode)."""
    if first:
        return h * W[:, 0] + b
    return ad.gemv(W, h) + b


def _linmap(W, d, first=False):
    if first:
        return d * W[:, 0]
    return ad.gemv(W, d)


def net_forward(net, x):
    """Evaluate a net on a non-negative scalar, checking constraints."""
    net.validate()
    return net(x)


def init_net(flavor, seed, widths=(10,), input_scale=1.0, enforce=True):
    """Kaiming-uniform initialization mapped to the non-negative orthant.

    Weights are drawn from the fan-in-scaled uniform law and passed through
    an absolute value (identity for the unconstrained variant); activation
    parameters start in O(1) ranges suited to order-one scaled inputs.
    """
    rng = np.random.default_rng(seed)
    sizes = [1, *widths, 1]
    weights, biases, acts = [], [], []
    for i in range(len(sizes) - 1):
        fan_in = sizes[i]
        wb = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-wb, wb, size=(sizes[i + 1], sizes[i]))
        b = rng.uniform(-1.0 / np.sqrt(fan_in), 1.0 / np.sqrt(fan_in),
                        size=sizes[i + 1])
        if enforce:
            W, b = np.abs(W), np.abs(b)
        weights.append(W)
        biases.append(b)
        if i < len(sizes) - 2:
            if flavor == POSITIVE_MONOTONE_CONVEX:
                acts.append(np.array([rng.uniform(0.5, 1.5)]))
            else:
                acts.append(np.array([rng.uniform(0.5, 1.5),
                                      rng.uniform(0.1, 1.0)]))
    return ConstrainedNet(flavor, weights, biases, acts,
                          input_scale=input_scale, enforce=enforce)


# ---------------------------------------------------------------------------
# hardening wrappers
# ---------------------------------------------------------------------------

class IsotropicHardeningNet:
    """Homothetic ratio R(r) built from a positive-monotone net.

    R(r) = 1 / N(s r) - 1 / N(0) + 1 with a reciprocal guard; decreasing in
    r and exactly 1 at r = 0 by construction.  The unconstrained ablation
    variant drops the reciprocal (it exists only to force the decrease) and
    uses the shifted net output directly.
    """

    trainable = True

    def __init__(self, net):
        self.net = net

    @classmethod
    def fresh(cls, seed, input_scale=100.0, widths=(10,), enforce=True):
        return cls(init_net(POSITIVE_MONOTONE, seed, widths=widths,
                            input_scale=input_scale, enforce=enforce))

    def _pair(self, r, order, params):
        a, da, dda = self.net.eval_with_derivatives(r, order=order, params=params)
        a0 = self.net.eval_with_derivatives(
            ad.value_of(r) * 0.0, order=0, params=params)[0]
        return a, da, dda, a0

    def value(self, r, params=None):
        a, _, _, a0 = self._pair(r, 0, params)
        if self.net.enforce:
            return 1.0 / (a + _RECIP_GUARD) - 1.0 / (a0 + _RECIP_GUARD) + 1.0
        return a - a0 + 1.0

    def deriv(self, r, params=None):
        a, da, _, _ = self._pair(r, 1, params)
        if self.net.enforce:
            return -da / (a + _RECIP_GUARD) ** 2
        return da

    def second(self, r, params=None):
        a, da, dda, _ = self._pair(r, 2, params)
        if self.net.enforce:
            g = a + _RECIP_GUARD
            return 2.0 * da * da / g ** 3 - dda / g ** 2
        return dda

    def value_and_deriv(self, r, params=None):
        a, da, _, a0 = self._pair(r, 1, params)
        if self.net.enforce:
            g = a + _RECIP_GUARD
            return 1.0 / g - 1.0 / (a0 + _RECIP_GUARD) + 1.0, -da / g ** 2
        return a - a0 + 1.0, da

    def parameters(self):
        return self.net.parameters()


class KinematicHardeningNet:
    """Kinematic potential phi(|X|_F^2) from a convex increasing net.

    phi(u) = N(s u) - N(0): exactly zero at zero, non-negative, increasing
    and convex for the constrained flavor.
    """

    trainable = True

    def __init__(self, net):
        self.net = net

    @classmethod
    def fresh(cls, seed, input_scale=1.0, widths=(10,), enforce=True):
        return cls(init_net(POSITIVE_MONOTONE_CONVEX, seed, widths=widths,
                            input_scale=input_scale, enforce=enforce))

    def value(self, u, params=None):
        a = self.net.eval_with_derivatives(u, order=0, params=params)[0]
        a0 = self.net.eval_with_derivatives(
            ad.value_of(u) * 0.0, order=0, params=params)[0]
        return a - a0

    def deriv(self, u, params=None):
        return self.net.eval_with_derivatives(u, order=1, params=params)[1]

    def second(self, u, params=None):
        return self.net.eval_with_derivatives(u, order=2, params=params)[2]

    def parameters(self):
        return self.net.parameters()


class AnalyticIsotropicHardening:
    """Closed-form homothetic ratio (tests, limits like R == 1)."""

    trainable = False

    def __init__(self, fn, dfn=None, d2fn=None):
        self.fn, self.dfn, self.d2fn = fn, dfn or (lambda r: 0.0 * r), \
            d2fn or (lambda r: 0.0 * r)

    def value(self, r, params=None):
        return self.fn(r)

    def deriv(self, r, params=None):
        return self.dfn(r)

    def second(self, r, params=None):
        return self.d2fn(r)

    def value_and_deriv(self, r, params=None):
        return self.fn(r), self.dfn(r)

    def parameters(self):
        return {}


class AnalyticKinematicPotential:
    """Closed-form phi(u) (tests, limits like phi == 0 or quadratic phi)."""

    trainable = False

    def __init__(self, fn, dfn=None, d2fn=None):
        self.fn, self.dfn, self.d2fn = fn, dfn or (lambda u: 0.0 * u), \
            d2fn or (lambda u: 0.0 * u)

    def value(self, u, params=None):
        return self.fn(u)

    def deriv(self, u, params=None):
        return self.dfn(u)

    def second(self, u, params=None):
        return self.d2fn(u)

    def parameters(self):
        return {}


def constant_R(value=1.0):
    return AnalyticIsotropicHardening(lambda r: value + 0.0 * r)


def zero_phi():
    return AnalyticKinematicPotential(lambda u: 0.0 * u)


def quadratic_phi(coeff):
    """phi(u) = coeff * u (linear in |X|^2: Armstrong-Frederick recall)."""
    return AnalyticKinematicPotential(lambda u: coeff * u,
                                      lambda u: coeff + 0.0 * u,
                                      lambda u: 0.0 * u)
