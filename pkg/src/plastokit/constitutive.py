"""Elastic law and yield function with pluggable value/gradient contracts.

Shipped choices: isotropic linear elasticity and the pi-plane von Mises
yield function with homothetic isotropic scaling,

    f(sigma, X, R) = R * J(sigma - X) - sigma_y,

where ``J`` is the von Mises equivalent of the relative stress and ``R`` is
the homothetic ratio (R < 1 hardens, R > 1 softens).  Both objects are
immutable after construction and freely shareable; data-driven replacements
only need to honour the same value/gradient interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import tensors as tn
from .errors import DegenerateState


@dataclass(frozen=True)
class ElasticParams:
    """Young's modulus and Poisson ratio (E > 0, -1 < nu < 0.5)."""

    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0.0:
            raise ValueError(f"E must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"nu must lie in (-1, 0.5), got {self.nu}")


class LinearElasticity:
    """Isotropic Hooke's law sigma = C : eps_e."""

    def __init__(self, E, nu):
        self.params = ElasticParams(E, nu)
        self.E = float(E)
        self.nu = float(nu)
        self.lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        self.mu = E / (2.0 * (1.0 + nu))
        self.bulk = E / (3.0 * (1.0 - 2.0 * nu))
        # 6x6 modulus on the stored-component basis (shear rows are 2*mu)
        M = 2.0 * self.mu * np.eye(6)
        M[:3, :3] += self.lam
        self._M = M

    def modulus6(self):
        """Fourth-order modulus as a 6x6 matrix on the symmetric basis."""
        return self._M.copy()

    def stress(self, eps_e):
        """sigma = lam tr(eps) I + 2 mu eps, componentwise on 6-vectors."""
        if isinstance(eps_e, (ad.Dual, ad.Var)):
            return ad.matvec(self._M, eps_e)
        return self._M @ eps_e

    def energy(self, eps_e):
        """Stored energy 0.5 eps : C : eps."""
        return 0.5 * tn.ddot(eps_e, self.stress(eps_e))


def elastic_stress(eps_e, params):
    """Free-function form of the elastic law (spec'd operation)."""
    return LinearElasticity(params.E, params.nu).stress(np.asarray(eps_e, dtype=float))


@dataclass(frozen=True)
class YieldParams:
    """Initial yield stress sigma_y > 0."""

    sigma_y: float

    def __post_init__(self):
        if not self.sigma_y > 0.0:
            raise ValueError(f"sigma_y must be positive, got {self.sigma_y}")


class VonMisesYield:
    """Pi-plane von Mises yield with homothetic isotropic scaling.

    ``value`` evaluates f = R*J(sigma - X) - sigma_y directly through the
    deviator (smooth for Newton); :meth:`value_via_pi` keeps the eigen +
    pi-coordinate route as a cross-check of the same homothetic form.
    """

    def __init__(self, sigma_y):
        self.params = YieldParams(sigma_y)
        self.sigma_y = float(sigma_y)

    def equivalent(self, rel):
        """J(rel): von Mises equivalent of the relative stress."""
        return tn.vm_equivalent(rel)

    def value(self, sigma, X, R):
        rel = sigma - X
        return R * tn.vm_equivalent(rel) - self.sigma_y

    def value_via_pi(self, sigma, X, R):
        """Same value computed through principal values and pi-coordinates."""
        rel = np.asarray(sigma, dtype=float) - np.asarray(X, dtype=float)
        p1, p2, _ = tn.pi_coords(tn.principal_values(rel))
        return R * np.sqrt(1.5) * np.sqrt(p1 * p1 + p2 * p2) - self.sigma_y

    def flow_direction(self, rel):
        """n = (3/2) dev(rel) / J(rel); generic-arithmetic safe."""
        dev = tn.deviator(rel)
        J = ad.sqrt(1.5 * tn.ddot(dev, dev)) if isinstance(rel, (ad.Dual, ad.Var)) \
            else np.sqrt(1.5 * tn.ddot(dev, dev))
        return dev * (1.5 / J), J

    def gradients(self, sigma, X, R):
        """(df/dsigma, df/dX, df/dR) away from the hydrostatic axis.

        Raises :class:`DegenerateState` when J(sigma - X) < 1e-12 sigma_y.
        """
        rel = np.asarray(sigma, dtype=float) - np.asarray(X, dtype=float)
        J = tn.vm_equivalent(rel)
        if J < 1e-12 * self.sigma_y:
            raise DegenerateState("yield gradient undefined on the hydrostatic axis")
        n = 1.5 * tn.deviator(rel) / J
        return R * n, -R * n, J
