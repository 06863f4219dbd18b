"""Ground-truth phenomenological models used to synthesize data.

Both reference laws use the additive yield convention

    f = J(sigma - X) - sigma_y - R,

so the yield radius grows by adding the isotropic force R (in contrast to
the surrogate's multiplicative homothetic ratio).  They reuse the shared
return-map Newton machinery with their own residual definitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import tensors as tn
from .constitutive import LinearElasticity
from .loadpath import LoadingPath
from .returnmap import (RateIndependentModel, SolveInfo, STRAIN, UNIAXIAL,
                        pow_safe)
from .state import MaterialState, MultiBackstressState


# ---------------------------------------------------------------------------
# single nonlinear-kinematic model (Voce isotropic + Ohno-Wang-type recall)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleNlkParams:
    """Material constants of the single-backstress reference model."""

    E: float = 200e3
    nu: float = 0.3
    C: float = 15.0
    gamma: float = 550.0
    m: float = 0.9
    H1: float = 0.1875
    H2: float = 0.25
    H3: float = 2.0
    sigma_y: float = 207.0

    def __post_init__(self):
        if self.E <= 0 or self.sigma_y <= 0 or self.m <= 0:
            raise ValueError("E, sigma_y and m must be positive")


@dataclass(frozen=True)
class ParamBounds:
    """Box bounds for the phenomenological parameter fit."""

    lower: dict
    upper: dict

    @classmethod
    def table_defaults(cls):
        return cls(lower={"C": 1.0, "gamma": 1.0, "m": 0.5,
                          "H1": 0.01, "H2": 0.01, "H3": 0.01},
                   upper={"C": 100.0, "gamma": 2000.0, "m": 1.5,
                          "H1": 5.0, "H2": 5.0, "H3": 5.0})


def voce_R(r, p):
    """Voce isotropic hardening H1 r + H2 (1 - exp(-H3 r))."""
    return p.H1 * r + p.H2 * (1.0 - np.exp(-p.H3 * r))


def voce_R_deriv(r, p):
    return p.H1 + p.H2 * p.H3 * np.exp(-p.H3 * r)


class SingleNlkModel(RateIndependentModel):
    """Backward-Euler integrated single-NLK law.

        Xdot = (2/3) C epsdot_p - gamma (X:X)^m X rdot,     rdot = dlam.

    The six hardening constants are exposed as trainable parameters so the
    same gradient framework that trains the surrogate can calibrate them.
    """

    def __init__(self, params):
        self.p = params
        self.elastic = LinearElasticity(params.E, params.nu)
        self.sigma_y = params.sigma_y
        self._theta = {k: np.array([getattr(params, k)])
                       for k in ("C", "gamma", "m", "H1", "H2", "H3")}
        self._fit_bounds = None

    def parameters(self):
        return self._theta

    def material_names(self):
        return tuple(self._theta.keys())

    def material_summary(self):
        return float(self._theta["C"][0])

    def set_fit_bounds(self, bounds):
        self._fit_bounds = bounds

    def project_parameters(self):
        """Clamp fitted constants back into their box bounds."""
        if self._fit_bounds is None:
            return
        for k, arr in self._theta.items():
            np.clip(arr, self._fit_bounds.lower[k], self._fit_bounds.upper[k],
                    out=arr)

    def adjoint_state_partials(self):
        inv = 1.0 / self.sigma_y
        return {"X": (slice(6, 12), -inv), "r": (12, -1.0),
                "eps_p11": (0, 1.0)}

    def current_params(self):
        """SingleNlkParams rebuilt from the (possibly updated) arrays."""
        vals = {k: float(v[0]) for k, v in self._theta.items()}
        return SingleNlkParams(E=self.p.E, nu=self.p.nu,
                               sigma_y=self.p.sigma_y, **vals)

    def _read(self, params):
        src = self._theta if params is None else {**self._theta, **params}
        return (src["C"][0], src["gamma"][0], src["m"][0],
                src["H1"][0], src["H2"][0], src["H3"][0])

    def _voce(self, r, H1, H2, H3):
        return H1 * r + H2 * (1.0 - ad.exp(-H3 * r))

    def initial_state(self):
        return MaterialState(R=0.0)

    def f_trial(self, state, eps_e_trial):
        sigma = self.elastic.stress(eps_e_trial)
        J = tn.vm_equivalent(sigma - state.X)
        return float(J - self.sigma_y - voce_R(state.r, self.current_params()))

    def unknown_scales(self, mode):
        sy, E = self.sigma_y, self.elastic.E
        return np.concatenate([np.ones(6), np.full(6, sy), [1.0], [sy / E]])

    def pack_start(self, state, eps_e_trial):
        return np.concatenate([eps_e_trial, state.X, [state.r], [0.0]])

    def residual(self, z, state_n, mode, target, params=None):
        C, gamma, m, H1, H2, H3 = self._read(params)
        sy = self.sigma_y
        eps_e, X, r, dlam = z[0:6], z[6:12], z[12], z[13]

        sigma = self.elastic.stress(eps_e)
        dev = tn.deviator(sigma - X)
        J = ad.sqrt(1.5 * tn.ddot(dev, dev))
        n = dev * (1.5 / J)
        recall = gamma * pow_safe(tn.ddot(X, X), m) * X

        if mode == STRAIN:
            rows_strain = eps_e - target + dlam * n
        else:
            row0 = eps_e[0] + state_n.eps_p[0] + dlam * n[0] - target
            rows_strain = ad.concat([row0, sigma[1:6] * (1.0 / sy)])
        rows_X = (X - state_n.X - dlam * ((2.0 / 3.0) * C) * n
                  + dlam * recall) * (1.0 / sy)
        row_r = r - state_n.r - dlam
        row_f = (J - sy - self._voce(r, H1, H2, H3)) * (1.0 / sy)
        return ad.concat([rows_strain, rows_X, row_r, row_f])

    def update_state(self, state_n, z, mode, target):
        eps_e, X, r, dlam = z[0:6], z[6:12], z[12], z[13]
        sigma = self.elastic.stress(eps_e)
        dev = tn.deviator(sigma - X)
        n = 1.5 * dev / np.sqrt(1.5 * tn.ddot(dev, dev))
        return MaterialState(eps_e=eps_e.copy(), X=X.copy(), r=float(r),
                             R=float(voce_R(r, self.current_params())),
                             eps_p=state_n.eps_p + dlam * n)

    def dissipation_increment(self, state_n, state_out, sigma, dlam):
        deps_p = state_out.eps_p - state_n.eps_p
        dr = state_out.r - state_n.r
        work = tn.ddot(sigma, deps_p) - state_out.R * dr
        C = float(self._theta["C"][0])
        if C > 1e-14:
            dalpha = (state_out.X - state_n.X) * (1.5 / C)
            work -= tn.ddot(state_out.X, dalpha)
        return float(work)


# ---------------------------------------------------------------------------
# multi nonlinear-kinematic (Chaboche) model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiNlkParams:
    """Chaboche superposed-backstress constants.

    ``k`` is the initial yield radius; the asymptotic isotropic amplitude
    follows Q(q) = Q_M + (Q_0 - Q_M) exp(-2 mu q) where q is a running
    maximum of the equivalent plastic strain (the strain-memory proxy).
    Elastic constants are not part of the published table and default to
    the single-NLK ones.
    """

    C1: float = 80e3
    gamma1: float = 800.0
    C2: float = 300e3
    gamma2: float = 10e3
    C3: float = 1e3
    gamma3: float = 7.0
    b: float = 8.0
    Q_M: float = 300.0
    Q_0: float = 14.0
    mu: float = 10.0
    k: float = 100.0
    m: float = 2.0
    E: float = 200e3
    nu: float = 0.3

    def __post_init__(self):
        if min(self.k, self.m) <= 0 or min(self.C1, self.C2, self.C3,
                                           self.b) < 0:
            raise ValueError("multi-NLK constants must be non-negative "
                             "(k, m strictly positive)")


class MultiNlkModel(RateIndependentModel):
    """Backward-Euler integrated Chaboche model with three backstresses."""

    def __init__(self, params):
        self.p = params
        self.elastic = LinearElasticity(params.E, params.nu)
        self.sigma_y = params.k

    def initial_state(self):
        return MultiBackstressState(R=0.0)

    def Q_of_q(self, q):
        p = self.p
        return p.Q_M + (p.Q_0 - p.Q_M) * np.exp(-2.0 * p.mu * q)

    def _R_next(self, R_n, Q, dlam):
        """Backward-Euler closed form of Rdot = b (Q - R) rdot."""
        b = self.p.b
        return (R_n + b * Q * dlam) / (1.0 + b * dlam)

    def f_trial(self, state, eps_e_trial):
        sigma = self.elastic.stress(eps_e_trial)
        J = tn.vm_equivalent(sigma - state.X)
        return float(J - self.sigma_y - state.R)

    def unknown_scales(self, mode):
        sy, E = self.sigma_y, self.elastic.E
        return np.concatenate([np.ones(6), np.full(18, sy), [1.0], [sy / E]])

    def pack_start(self, state, eps_e_trial):
        return np.concatenate([eps_e_trial, state.Xs.ravel(),
                               [state.r], [0.0]])

    def residual(self, z, state_n, mode, target, params=None):
        p = self.p
        sy = self.sigma_y
        eps_e = z[0:6]
        Xs = [z[6:12], z[12:18], z[18:24]]
        r, dlam = z[24], z[25]

        sigma = self.elastic.stress(eps_e)
        Xtot = Xs[0] + Xs[1] + Xs[2]
        dev = tn.deviator(sigma - Xtot)
        J = ad.sqrt(1.5 * tn.ddot(dev, dev))
        n = dev * (1.5 / J)

        R_next = self._R_next(state_n.R, self.Q_of_q(state_n.q), dlam)
        tau = 1.0 + R_next / sy

        rows = []
        if mode == STRAIN:
            rows.append(eps_e - target + dlam * n)
        else:
            row0 = eps_e[0] + state_n.eps_p[0] + dlam * n[0] - target
            rows.append(ad.concat([row0, sigma[1:6] * (1.0 / sy)]))
        for i, (Ci, gi) in enumerate(((p.C1, p.gamma1), (p.C2, p.gamma2),
                                      (p.C3, p.gamma3))):
            gbar = gi / tau
            # a dead branch (C_i = 0) keeps its backstress at zero; the
            # recall coefficient is arbitrary there, so guard the division
            recall_coeff = gbar * gbar / Ci if Ci > 0.0 else 0.0
            Ji_pow = pow_safe(1.5 * tn.ddot(tn.deviator(Xs[i]),
                                            tn.deviator(Xs[i])),
                              0.5 * (p.m - 1.0))
            rows.append((Xs[i] - state_n.Xs[i]
                         - dlam * ((2.0 / 3.0) * Ci) * n
                         + dlam * recall_coeff * Ji_pow * Xs[i])
                        * (1.0 / sy))
        rows.append(r - state_n.r - dlam)
        rows.append((J - sy - R_next) * (1.0 / sy))
        return ad.concat(rows)

    def update_state(self, state_n, z, mode, target):
        eps_e = z[0:6]
        Xs = np.stack([z[6:12], z[12:18], z[18:24]])
        r, dlam = float(z[24]), float(z[25])
        Xtot = Xs.sum(axis=0)
        sigma = self.elastic.stress(eps_e)
        dev = tn.deviator(sigma - Xtot)
        n = 1.5 * dev / np.sqrt(1.5 * tn.ddot(dev, dev))
        eps_p = state_n.eps_p + dlam * n
        R = self._R_next(state_n.R, self.Q_of_q(state_n.q), dlam)
        q = max(state_n.q, float(np.sqrt(2.0 / 3.0 * tn.ddot(eps_p, eps_p))))
        return MultiBackstressState(eps_e=eps_e.copy(), eps_p=eps_p,
                                    X=Xtot, r=r, R=float(R), Xs=Xs, q=q)

    def dissipation_increment(self, state_n, state_out, sigma, dlam):
        p = self.p
        deps_p = state_out.eps_p - state_n.eps_p
        dr = state_out.r - state_n.r
        work = tn.ddot(sigma, deps_p) - state_out.R * dr
        for i, Ci in enumerate((p.C1, p.C2, p.C3)):
            dalpha = (state_out.Xs[i] - state_n.Xs[i]) * (1.5 / Ci)
            work -= tn.ddot(state_out.Xs[i], dalpha)
        return float(work)


# ---------------------------------------------------------------------------
# dataset synthesis
# ---------------------------------------------------------------------------

def run_uniaxial_path(model, path, collect_states=False):
    """Drive a model along a LoadingPath; returns (eps11, sig11[, states])."""
    state = model.initial_state()
    eps = [0.0]
    sig = [0.0]
    states = [state]
    for target in path.targets():
        state, s11, _, _ = model.integrate_uniaxial(state, float(target))
        eps.append(float(target))
        sig.append(s11)
        if collect_states:
            states.append(state)
    eps, sig = np.asarray(eps), np.asarray(sig)
    if collect_states:
        return eps, sig, states
    return eps, sig


def generate_uniaxial_dataset(path, model, noise=0.0, seed=0):
    """(step, eps11, sig11) arrays along a path, optional Gaussian noise.

    The perturbation standard deviation is noise * sigma_y; rows start with
    the virgin (0, 0) sample so a path with N_L increments yields N_L + 1
    rows.  Deterministic per seed.
    """
    eps, sig = run_uniaxial_path(model, path)
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        sig = sig + rng.normal(0.0, noise * model.sigma_y, size=sig.shape)
    steps = np.arange(eps.shape[0])
    return steps, eps, sig
