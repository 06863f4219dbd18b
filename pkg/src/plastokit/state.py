"""Converged material-point states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MaterialState:
    """Converged internal state at a material point.

    ``r`` is the accumulated internal variable driving isotropic hardening
    and is non-decreasing along any loading history; ``R`` caches the
    conjugate isotropic quantity consistent with ``r`` at convergence.
    """

    eps_e: np.ndarray = field(default_factory=lambda: np.zeros(6))
    eps_p: np.ndarray = field(default_factory=lambda: np.zeros(6))
    X: np.ndarray = field(default_factory=lambda: np.zeros(6))
    r: float = 0.0
    R: float = 1.0

    def copy(self):
        return MaterialState(self.eps_e.copy(), self.eps_p.copy(),
                             self.X.copy(), self.r, self.R)


@dataclass
class MultiBackstressState(MaterialState):
    """State with superposed backstresses plus the strain-memory proxy q.

    ``X`` always holds the backstress sum; the parts live in ``Xs``.
    """

    Xs: np.ndarray = field(default_factory=lambda: np.zeros((3, 6)))
    q: float = 0.0

    def copy(self):
        return MultiBackstressState(self.eps_e.copy(), self.eps_p.copy(),
                                    self.X.copy(), self.r, self.R,
                                    self.Xs.copy(), self.q)


@dataclass
class PlasticIncrement:
    """Outcome bookkeeping of one integration step."""

    dlam: float = 0.0
    iterations: int = 0
    converged: bool = True
