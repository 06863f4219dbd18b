"""Implicit elastic-predictor / plastic-corrector integration.

One Newton driver serves every rate-independent model in the toolkit (the
trainable surrogate and the phenomenological reference laws).  Models
supply residual builders written in generic arithmetic; the Jacobian of the
nonlinear system is obtained with forward-mode duals, and the converged
Jacobian is reused for consistent tangents and for the adjoint pass of the
trainer.

Two control modes:

* strain controlled -- the full strain increment is prescribed (FEM use),
* uniaxial mixed control -- eps_11 is prescribed and the five off-axis
  stresses are constrained to zero (data generation and training use).

Unknowns are nondimensionalized before the solve (stresses by sigma_y,
the plastic multiplier by sigma_y/E) to keep the system well conditioned.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import networks as nets
from . import tensors as tn
from .constitutive import LinearElasticity, VonMisesYield
from .errors import (NegativeMultiplier, NoConvergence, NonFinite,
                     SingularSystem)
from .state import MaterialState, PlasticIncrement

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50

STRAIN = "strain"
UNIAXIAL = "uniaxial"


class SolveInfo:
    """Converged-solve record consumed by tangents and the adjoint pass."""

    __slots__ = ("mode", "elastic", "x", "jac", "residual_history",
                 "eps_e_trial", "target")

    def __init__(self, mode, elastic, x=None, jac=None, residual_history=None,
                 eps_e_trial=None, target=None):
        self.mode = mode
        self.elastic = elastic
        self.x = x
        self.jac = jac
        self.residual_history = residual_history or []
        self.eps_e_trial = eps_e_trial
        self.target = target


def _newton(residual_fn, x0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Plain Newton (no line search); returns (x, jac_at_x, history)."""
    x = np.array(x0, dtype=float)
    history = []
    ref = 1.0
    for it in range(max_iter):
        out = residual_fn(ad.Dual.seed(x))
        G, J = out.val, out.tan
        if not np.all(np.isfinite(G)):
            raise NoConvergence("non-finite residual in return map",
                                residual=np.nan, iterations=it)
        norm = float(np.max(np.abs(G)))
        history.append(norm)
        if it == 0:
            ref = max(1.0, norm)
        if norm <= tol * ref:
            return x, J, history
        try:
            dx = np.linalg.solve(J, -G)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"singular return-map Jacobian: {exc}") from exc
        x = x + dx
    raise NoConvergence(
        f"return map did not converge in {max_iter} iterations "
        f"(relative residual {history[-1] / ref:.3e})",
        residual=history[-1], iterations=max_iter)


class RateIndependentModel:
    """Template for implicitly integrated rate-independent models.

    Subclasses define the unknown layout, the residual builder (generic
    arithmetic), the trial yield value and the state update; everything
    else (predictor/corrector logic, Newton, tangents) is shared.
    """

    elastic: LinearElasticity
    sigma_y: float

    # -- to be provided by subclasses ----------------------------------------

    def initial_state(self):
        raise NotImplementedError

    def unknown_scales(self, mode):
        raise NotImplementedError

    def pack_start(self, state, eps_e_trial):
        raise NotImplementedError

    def residual(self, x, state_n, mode, target, params=None):
        raise NotImplementedError

    def update_state(self, state_n, z, mode, target):
        raise NotImplementedError

    def f_trial(self, state, eps_e_trial):
        raise NotImplementedError

    def parameters(self):
        """Trainable parameter arrays by name (empty when not trainable)."""
        return {}

    # -- shared machinery ------------------------------------------------------

    def uniaxial_trial_strain(self, state, eps11_target):
        """Closed-form elastic trial honouring the off-axis constraints."""
        e11 = eps11_target - state.eps_p[0]
        nu = self.elastic.nu
        return np.array([e11, -nu * e11, -nu * e11, 0.0, 0.0, 0.0])

    def trial_step(self, state, increment, mode=STRAIN):
        """Elastic predictor: (eps_e_trial, sigma_trial, f_trial)."""
        if mode == STRAIN:
            eps_e_trial = state.eps_e + np.asarray(increment, dtype=float)
        else:
            eps_e_trial = self.uniaxial_trial_strain(state, float(increment))
        sigma_trial = self.elastic.stress(eps_e_trial)
        return eps_e_trial, sigma_trial, self.f_trial(state, eps_e_trial)

    def _solve(self, state, mode, target, eps_e_trial, params=None):
        scales = self.unknown_scales(mode)
        x0 = self.pack_start(state, eps_e_trial) / scales

        def residual_fn(x):
            return self.residual(x * scales, state, mode, target, params=params)

        x, jac, history = _newton(residual_fn, x0)
        z = x * scales
        dlam = z[-1]
        if dlam < -1e-12:
            raise NegativeMultiplier(
                f"converged plastic multiplier is negative ({dlam:.3e})")
        info = SolveInfo(mode, elastic=False, x=x, jac=jac,
                         residual_history=history,
                         eps_e_trial=eps_e_trial, target=target)
        new_state = self.update_state(state, z, mode, target)
        inc = PlasticIncrement(dlam=float(dlam), iterations=len(history),
                               converged=True)
        return new_state, inc, info

    def integrate_strain_controlled(self, state, deps, params=None):
        """One increment under full strain control.

        Returns (state, sigma, PlasticIncrement, SolveInfo).
        """
        eps_e_trial, sigma_trial, ft = self.trial_step(state, deps, STRAIN)
        if ft <= 0.0:
            new = state.copy()
            new.eps_e = eps_e_trial
            info = SolveInfo(STRAIN, elastic=True, eps_e_trial=eps_e_trial)
            return new, sigma_trial, PlasticIncrement(), info
        new_state, inc, info = self._solve(state, STRAIN, eps_e_trial,
                                           eps_e_trial, params=params)
        sigma = self.elastic.stress(new_state.eps_e)
        return new_state, sigma, inc, info

    def integrate_uniaxial(self, state, eps11_target, params=None):
        """One increment under uniaxial mixed control.

        Returns (state, sigma11, PlasticIncrement, SolveInfo); the off-axis
        stress components of the converged state vanish to solver tolerance.
        """
        eps_e_trial, sigma_trial, ft = self.trial_step(state, eps11_target,
                                                       UNIAXIAL)
        if ft <= 0.0:
            new = state.copy()
            new.eps_e = eps_e_trial
            info = SolveInfo(UNIAXIAL, elastic=True, eps_e_trial=eps_e_trial,
                             target=float(eps11_target))
            return new, float(sigma_trial[0]), PlasticIncrement(), info
        new_state, inc, info = self._solve(state, UNIAXIAL,
                                           float(eps11_target), eps_e_trial,
                                           params=params)
        sigma11 = float(self.elastic.stress(new_state.eps_e)[0])
        return new_state, sigma11, inc, info

    def consistent_tangent(self, info):
        """d sigma_{n+1} / d eps_trial from the converged Newton system."""
        M = self.elastic.modulus6()
        if info.elastic:
            return M
        n = info.jac.shape[0]
        B = np.zeros((n, 6))
        B[0:6, 0:6] = np.eye(6)
        try:
            Y = np.linalg.solve(info.jac, B)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"singular system in tangent: {exc}") from exc
        scales = self.unknown_scales(info.mode)
        deps_e = Y[0:6] * scales[0:6, None]
        return M @ deps_e


# ---------------------------------------------------------------------------
# the trainable surrogate
# ---------------------------------------------------------------------------

class SurrogateModel(RateIndependentModel):
    """Elastoplastic model with neural (or analytic) hardening functions.

    Yield: f = R(r) * J(sigma - X) - sigma_y (homothetic isotropic scaling).
    Kinematic free energy (C/3) alpha:alpha, so the backstress evolves as

        Xdot = -(2/3) C dlam (df/dX + dphi/dX),

    whose linear part is (2/3) C epsdot_p: the uniaxial kinematic stress
    modulus equals C, matching the reference laws' parameter meaning.
    The accumulated variable grows as rdot = +dlam * df/dR >= 0.
    """

    def __init__(self, elastic, yield_fn, iso, kin, C):
        self.elastic = elastic
        self.yield_fn = yield_fn
        self.sigma_y = yield_fn.sigma_y
        self.iso = iso
        self.kin = kin
        self.C = np.array([float(C)])

    @classmethod
    def fresh(cls, E, nu, sigma_y, seed=0, C0=5.0, width=10,
              iso_input_scale=None, kin_input_scale=1.0, enforce=True):
        """Untrained surrogate with freshly initialized hardening nets.

        The isotropic net input scale defaults to 100/sigma_y: the
        accumulated variable grows like (stress * strain), so this keeps
        the scaled input of order one on uniaxial paths, which is what the
        nominal factor of 100 assumes.
        """
        if iso_input_scale is None:
            iso_input_scale = 100.0 / sigma_y
        iso = nets.IsotropicHardeningNet.fresh(seed, input_scale=iso_input_scale,
                                               widths=(width,), enforce=enforce)
        kin = nets.KinematicHardeningNet.fresh(seed + 1,
                                               input_scale=kin_input_scale,
                                               widths=(width,), enforce=enforce)
        return cls(LinearElasticity(E, nu), VonMisesYield(sigma_y), iso, kin, C0)

    # -- protocol --------------------------------------------------------------

    def initial_state(self):
        return MaterialState()

    def parameters(self):
        out = {}
        if getattr(self.iso, "trainable", False):
            out.update({"R." + k: v for k, v in self.iso.parameters().items()})
        if getattr(self.kin, "trainable", False):
            out.update({"phi." + k: v for k, v in self.kin.parameters().items()})
        out["C"] = self.C
        return out

    def _theta(self, params):
        """Split a flat override dict back into per-net views."""
        if params is None:
            return None, None, self.C[0]
        Rv = {k[2:]: v for k, v in params.items() if k.startswith("R.")}
        Pv = {k[4:]: v for k, v in params.items() if k.startswith("phi.")}
        C = params["C"][0] if "C" in params else self.C[0]
        return Rv or None, Pv or None, C

    def f_trial(self, state, eps_e_trial):
        sigma = self.elastic.stress(eps_e_trial)
        return float(self.yield_fn.value(sigma, state.X, state.R))

    def material_names(self):
        return ("C",)

    def material_summary(self):
        return float(self.C[0])

    def project_parameters(self):
        """Constraint projection after an optimizer step (C stays >= 0)."""
        if getattr(self.iso, "trainable", False):
            self.iso.net.project()
        if getattr(self.kin, "trainable", False):
            self.kin.net.project()
        np.maximum(self.C, 0.0, out=self.C)

    def adjoint_state_partials(self):
        """Residual rows that read the previous state (constant blocks)."""
        inv = 1.0 / self.sigma_y
        return {"X": (slice(6, 12), -inv), "r": (12, -inv),
                "eps_p11": (0, 1.0)}

    def unknown_scales(self, mode):
        sy, E = self.sigma_y, self.elastic.E
        return np.concatenate([np.ones(6), np.full(6, sy), [sy], [sy / E]])

    def pack_start(self, state, eps_e_trial):
        return np.concatenate([eps_e_trial, state.X, [state.r], [0.0]])

    def residual(self, z, state_n, mode, target, params=None):
        Rv, Pv, C = self._theta(params)
        sy = self.sigma_y
        eps_e = z[0:6]
        X = z[6:12]
        r = z[12]
        dlam = z[13]

        sigma = self.elastic.stress(eps_e)
        rel = sigma - X
        n, J = self.yield_fn.flow_direction(rel)
        Rr = self.iso.value(r, Rv)
        flow = Rr * n
        phi_d = self.kin.deriv(tn.ddot(X, X), Pv)
        kin_dir = (2.0 / 3.0) * C * (2.0 * phi_d * X - flow)

        if mode == STRAIN:
            # target carries the trial elastic strain in this mode
            rows_strain = eps_e - target + dlam * flow
        else:
            row0 = eps_e[0] + state_n.eps_p[0] + dlam * flow[0] - target
            rows_off = sigma[1:6] * (1.0 / sy)
            rows_strain = ad.concat([row0, rows_off])
        rows_X = (X - state_n.X + dlam * kin_dir) * (1.0 / sy)
        row_r = (r - state_n.r - dlam * J) * (1.0 / sy)
        row_f = (Rr * J - sy) * (1.0 / sy)
        return ad.concat([rows_strain, rows_X, row_r, row_f])

    def update_state(self, state_n, z, mode, target):
        eps_e, X, r, dlam = z[0:6], z[6:12], z[12], z[13]
        sigma = self.elastic.stress(eps_e)
        n, _ = self.yield_fn.flow_direction(sigma - X)
        flow = self.iso.value(r) * n
        new = MaterialState(eps_e=eps_e.copy(), X=X.copy(), r=float(r),
                            R=float(self.iso.value(r)),
                            eps_p=state_n.eps_p + dlam * flow)
        return new

    def dissipation_increment(self, state_n, state_out, sigma, dlam):
        """sigma : deps_p - R dr - X : dalpha over one converged step.

        With the quadratic kinematic energy, alpha = 3 X / (2 C); the value
        reduces to 2 dlam phi'(|X|^2) |X|^2 >= 0 on plastic steps.
        """
        deps_p = state_out.eps_p - state_n.eps_p
        dr = state_out.r - state_n.r
        work = tn.ddot(sigma, deps_p) - state_out.R * dr
        C = self.C[0]
        if C > 1e-14:
            dalpha = (state_out.X - state_n.X) * (1.5 / C)
            work -= tn.ddot(state_out.X, dalpha)
        return float(work)

    # -- serialization ----------------------------------------------------------

    def to_json_dict(self):
        d = {"E": self.elastic.E, "nu": self.elastic.nu,
             "sigma_y": self.sigma_y, "C": float(self.C[0])}
        if getattr(self.iso, "trainable", False):
            d["R_net"] = self.iso.net.to_json_dict()
        if getattr(self.kin, "trainable", False):
            d["phi_net"] = self.kin.net.to_json_dict()
        return d

    @classmethod
    def from_json_dict(cls, d):
        iso = nets.IsotropicHardeningNet(
            nets.ConstrainedNet.from_json_dict(d["R_net"]))
        kin = nets.KinematicHardeningNet(
            nets.ConstrainedNet.from_json_dict(d["phi_net"]))
        return cls(LinearElasticity(d["E"], d["nu"]),
                   VonMisesYield(d["sigma_y"]), iso, kin, d["C"])


def pow_safe(u, p):
    """u**p for u >= 0 with the u -> 0 limit (value and tangents) at zero.

    Valid for p > 0; the exponent may itself be a generic number.
    """
    if ad.value_of(u) < 1e-280:
        return 0.0 * u
    if isinstance(p, (int, float)):
        return u ** float(p)
    return ad.exp(p * ad.log(u))
