"""Symmetric 3x3 tensor algebra on 6-vectors.

Storage convention: ``[11, 22, 33, 12, 13, 23]`` holding *tensor* components
(shear stored once, no engineering factors).  Double contractions therefore
weight the off-diagonal slots twice; every contraction in the toolkit goes
through :func:`ddot` so the factor bookkeeping lives in exactly one place.

All algebraic helpers accept plain numpy vectors as well as the generic
autodiff types, so they can sit inside differentiated residuals.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import NumericalFailure

#: contraction weights for the 6-vector storage
W6 = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])

#: identity tensor
IDENTITY6 = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

#: deviatoric projector as a 6x6 matrix on the stored components
DEV6 = np.eye(6) - np.outer(IDENTITY6, IDENTITY6) / 3.0

#: fixed orthogonal transform from principal values to pi-plane coordinates
PI_TRANSFORM = np.array([
    [np.sqrt(2.0 / 3.0), -np.sqrt(1.0 / 6.0), -np.sqrt(1.0 / 6.0)],
    [0.0, np.sqrt(0.5), -np.sqrt(0.5)],
    [np.sqrt(1.0 / 3.0), np.sqrt(1.0 / 3.0), np.sqrt(1.0 / 3.0)],
])

_IDX = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


def sym6(t11=0.0, t22=0.0, t33=0.0, t12=0.0, t13=0.0, t23=0.0):
    """Build a 6-vector from named components."""
    return np.array([t11, t22, t33, t12, t13, t23], dtype=float)


def from_matrix(A):
    """Store a symmetric 3x3 matrix as a 6-vector."""
    A = np.asarray(A, dtype=float)
    return np.array([A[i, j] for i, j in _IDX])


def to_matrix(v):
    """Expand a 6-vector to the full symmetric 3x3 matrix."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [v[0], v[3], v[4]],
        [v[3], v[1], v[5]],
        [v[4], v[5], v[2]],
    ])


def trace(v):
    return v[0] + v[1] + v[2]


def ddot(a, b):
    """Full double contraction A:B (off-diagonals counted twice)."""
    if isinstance(a, (ad.Dual, ad.Var)) or isinstance(b, (ad.Dual, ad.Var)):
        return ad.asum((a * W6) * b)
    return float(np.dot(a * W6, b))


def deviator(v):
    """A - tr(A)/3 I."""
    if isinstance(v, (ad.Dual, ad.Var)):
        return ad.matvec(DEV6, v)
    return DEV6 @ v


def frobenius_sq(v):
    """Squared Frobenius norm A:A."""
    return ddot(v, v)


def vm_equivalent(v):
    """Von Mises equivalent value sqrt(3/2 dev(A):dev(A))."""
    d = deviator(v)
    return ad.sqrt(1.5 * ddot(d, d)) if isinstance(v, (ad.Dual, ad.Var)) \
        else float(np.sqrt(1.5 * ddot(d, d)))


def invariants(v):
    """Principal invariants (I1, I2, I3) of a symmetric tensor."""
    i1 = trace(v)
    i2 = 0.5 * (i1 * i1 - ddot(v, v))
    i3 = float(np.linalg.det(to_matrix(v)))
    return float(i1), float(i2), i3


def principal_values(v, max_sweeps=50, tol=1e-14):
    """Eigenvalues of a symmetric tensor, sorted descending.

    Cyclic Jacobi rotations on the 3x3 matrix; raises
    :class:`NumericalFailure` if the off-diagonal norm has not collapsed
    after ``max_sweeps`` sweeps.
    """
    A = to_matrix(v)
    scale = np.max(np.abs(A))
    if scale == 0.0:
        return (0.0, 0.0, 0.0)
    for _ in range(max_sweeps):
        off = np.sqrt(A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2)
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if abs(A[p, q]) <= 1e-30 * scale:
                continue
            theta = 0.5 * (A[q, q] - A[p, p]) / A[p, q]
            t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) \
                if theta != 0.0 else 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            J = np.eye(3)
            J[p, p] = J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
    else:
        raise NumericalFailure("Jacobi eigen-solve did not converge in "
                               f"{max_sweeps} sweeps")
    vals = np.sort(np.diag(A))[::-1]
    return (float(vals[0]), float(vals[1]), float(vals[2]))


def pi_coords(principal):
    """Haigh-Westergaard pi-plane coordinates of three principal values."""
    p = PI_TRANSFORM @ np.asarray(principal, dtype=float)
    return (float(p[0]), float(p[1]), float(p[2]))


def outer6(a, b):
    """Open product of two 6-vectors (plain numpy, used in hand Jacobians)."""
    return np.outer(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
