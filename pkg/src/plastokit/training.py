"""Online training of material models against uniaxial stress-strain paths.

Every iteration drives the full loading path through the implicit return
map, accumulates the squared uniaxial stress error against the dataset and
differentiates it with respect to the trainable parameters.  The gradient
uses the implicit function theorem at each converged Newton point: one
adjoint solve with the transposed return-map Jacobian per plastic step,
plus a reverse-mode tape evaluation of the residual for the parameter
part.  Memory stays flat in the number of iterations and the result
matches differentiation through the solver at convergence.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .datasets import UniaxialDataset
from .errors import NoConvergence
from .loadpath import LoadingPath
from .reference import SingleNlkModel, SingleNlkParams, run_uniaxial_path
from .returnmap import RateIndependentModel, UNIAXIAL


@dataclass
class TrainConfig:
    """Optimizer settings (no learning-rate scheduling)."""

    iterations: int = 300
    lr_net: float = 1e-2
    lr_material: float = 5e-2
    weight_decay: float = 1e-4
    projection_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.lr_net <= 0 or self.lr_material <= 0:
            raise ValueError("learning rates must be positive")


@dataclass
class TrainRecord:
    """Per-iteration loss/C trace plus the best-loss snapshot."""

    losses: list = field(default_factory=list)
    C_values: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    best_loss: float = np.inf
    best_iteration: int = -1

    def normalized_losses(self):
        """Loss divided by its iteration-0 value."""
        if not self.losses:
            return np.array([])
        return np.asarray(self.losses) / self.losses[0]

    def write_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("iter,loss,C\n")
            for i, (l, c) in enumerate(zip(self.losses, self.C_values)):
                fh.write(f"{i},{float(l)!r},{float(c)!r}\n")


class AdamW:
    """Decoupled-weight-decay adaptive moments with per-parameter groups."""

    def __init__(self, params, settings, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.settings = settings            # name -> (lr, weight_decay)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p)
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / (1 - b1 ** self.t)
            vhat = self.v[name] / (1 - b2 ** self.t)
            lr, wd = self.settings[name]
            p -= lr * (mhat / (np.sqrt(vhat) + self.eps) + wd * p)


def optimizer_settings(params, cfg, material_names=("C",)):
    """Group learning rates: nets at lr_net, material scalars at lr_material.

    Weight decay applies to network weight/bias matrices only, never to
    activation parameters or material constants.
    """
    settings = {}
    for name in params:
        if name in material_names:
            settings[name] = (cfg.lr_material, 0.0)
        elif ".W" in name or ".b" in name:
            settings[name] = (cfg.lr_net, cfg.weight_decay)
        else:
            settings[name] = (cfg.lr_net, 0.0)
    return settings


# ---------------------------------------------------------------------------
# forward path drive and the adjoint gradient
# ---------------------------------------------------------------------------

@dataclass
class _Step:
    elastic: bool
    info: object
    state_before: object
    state_after: object
    sigma11: float


def forward_uniaxial(model, targets):
    """Integrate along per-increment eps11 targets; returns step records."""
    state = model.initial_state()
    steps = []
    for t in targets:
        new_state, s11, _, info = model.integrate_uniaxial(state, float(t))
        steps.append(_Step(info.elastic, info, state, new_state, s11))
        state = new_state
    return steps


def _sigma11_row(model):
    return model.elastic.modulus6()[0, :]


def path_loss(model, path, dataset):
    """Sum of squared uniaxial stress errors along the path."""
    sig_bar = dataset.interp_sigma(path.arc())
    steps = forward_uniaxial(model, path.targets())
    sig = np.array([s.sigma11 for s in steps])
    return float(np.sum((sig - sig_bar) ** 2))


def path_gradient(model, path, dataset):
    """(loss, parameter gradients, model stresses) via the adjoint pass."""
    targets = path.targets()
    sig_bar = dataset.interp_sigma(path.arc())
    steps = forward_uniaxial(model, targets)
    sig = np.array([s.sigma11 for s in steps])
    loss = float(np.sum((sig - sig_bar) ** 2))

    theta = model.parameters()
    grads = {k: np.zeros_like(v) for k, v in theta.items()}
    partials = model.adjoint_state_partials()
    row0 = _sigma11_row(model)
    nu = model.elastic.nu

    lam_e = np.zeros(6)     # d loss / d eps_e of the current state
    lam_X = np.zeros(model.initial_state().X.shape)
    lam_r = 0.0
    lam_p11 = 0.0

    for n in range(len(steps) - 1, -1, -1):
        st = steps[n]
        lam_e = lam_e + 2.0 * (sig[n] - sig_bar[n]) * row0
        if st.elastic:
            lam_p11 = lam_p11 - lam_e[0] + nu * (lam_e[1] + lam_e[2])
            lam_e = np.zeros(6)
            continue
        info = st.info
        scales = model.unknown_scales(info.mode)
        nz = scales.shape[0]
        lam_z = np.zeros(nz)
        lam_z[0:6] = lam_e
        lam_z[0] -= lam_p11
        xs, _ = partials["X"]
        lam_z[xs] = lam_X.ravel()
        rrow, _ = partials["r"]
        lam_z[rrow] = lam_r
        try:
            w = np.linalg.solve(info.jac.T, scales * lam_z)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular adjoint system: {exc}")

        # parameter part: reverse tape over the residual, seeded with w
        tape = ad.Tape()
        tvars = {k: tape.leaf(v) for k, v in theta.items()}
        z = info.x * scales
        G = model.residual(z, st.state_before, info.mode, info.target,
                           params=tvars)
        node_grads = tape.backward(G, w)
        for k, var in tvars.items():
            g = node_grads[var.idx]
            if g is not None:
                grads[k] -= np.reshape(g, grads[k].shape)

        # state part: residual derivatives w.r.t. the previous state are
        # constant identity blocks
        lam_prev_X = -partials["X"][1] * w[partials["X"][0]]
        lam_prev_r = -partials["r"][1] * w[partials["r"][0]]
        prow, pcoef = partials["eps_p11"]
        lam_p11 = -pcoef * w[prow]
        lam_X = np.reshape(lam_prev_X, lam_X.shape)
        lam_r = float(lam_prev_r)
        lam_e = np.zeros(6)

    return loss, grads, sig


def train(model, path, dataset, cfg):
    """Run the training loop; returns (best-loss model copy, TrainRecord).

    A step whose forward solve fails is skipped and logged; three
    consecutive failures abort the run.  Deterministic for a fixed seed at
    thread count 1.
    """
    record = TrainRecord()
    if cfg.iterations == 0:
        return model, record
    theta = model.parameters()
    opt = AdamW(theta, optimizer_settings(theta, cfg,
                                          material_names=model.material_names()))
    best = copy.deepcopy(model)
    consecutive = 0
    for it in range(cfg.iterations):
        try:
            loss, grads, _ = path_gradient(model, path, dataset)
        except NoConvergence as exc:
            record.skipped.append((it, str(exc)))
            consecutive += 1
            if consecutive >= 3:
                raise NoConvergence(
                    f"aborting training: 3 consecutive failed iterations "
                    f"(last: {exc})")
            continue
        consecutive = 0
        record.losses.append(loss)
        record.C_values.append(model.material_summary())
        if loss < record.best_loss:
            record.best_loss = loss
            record.best_iteration = it
            best = copy.deepcopy(model)
        opt.step(grads)
        model.project_parameters()
    return best, record


# ---------------------------------------------------------------------------
# evaluation and ablation
# ---------------------------------------------------------------------------

def evaluate_extrapolation(model, train_path, test_path, reference):
    """Relative L2 stress errors on the seen and unseen path segments.

    ``reference`` is a ground-truth model (integrated along the test path)
    or a precomputed (eps, sig) pair covering it.
    """
    if isinstance(reference, RateIndependentModel):
        _, sig_ref = run_uniaxial_path(reference, test_path)
        sig_ref = sig_ref[1:]
    else:
        eps_ref, sig_full = reference
        ds = UniaxialDataset(np.asarray(eps_ref), np.asarray(sig_full))
        sig_ref = ds.interp_sigma(test_path.arc())
    steps = forward_uniaxial(model, test_path.targets())
    sig = np.array([s.sigma11 for s in steps])
    arc = test_path.arc()
    cut = train_path.arc()[-1] * (1.0 + 1e-12)
    seen = arc <= cut
    out = {}
    for name, mask in (("interpolation", seen), ("extrapolation", ~seen)):
        if not np.any(mask):
            out[name] = 0.0
            continue
        diff = np.linalg.norm(sig[mask] - sig_ref[mask])
        out[name] = float(diff / max(np.linalg.norm(sig_ref[mask]), 1e-30))
    return out


def constraint_violations(model, r_grid, u_grid, dtol=1e-10, ctol=1e-8):
    """Count monotonicity/convexity violations of the learned R and phi."""
    n_mono_R = sum(1 for r in r_grid if model.iso.deriv(float(r)) > dtol)
    n_mono_phi = sum(1 for u in u_grid if model.kin.deriv(float(u)) < -dtol)
    n_conv_phi = sum(1 for u in u_grid if model.kin.second(float(u)) < -ctol)
    return {"R_monotonicity": n_mono_R, "phi_monotonicity": n_mono_phi,
            "phi_convexity": n_conv_phi,
            "total": n_mono_R + n_mono_phi + n_conv_phi}


def training_hull(model, path):
    """Largest r and |X|_F^2 the hardening nets see along a path."""
    steps = forward_uniaxial(model, path.targets())
    r_max = max(s.state_after.r for s in steps)
    from . import tensors as tn
    u_max = max(tn.ddot(s.state_after.X, s.state_after.X) for s in steps)
    return r_max, u_max


def ablate_constraints(make_model, train_path, test_path, dataset,
                       reference, cfg):
    """Train a constrained and an unconstrained variant on the same data.

    ``make_model(enforce)`` builds a fresh surrogate; both flavors share
    the data and config.  Returns per-flavor error reports plus violation
    counts of the learned hardening functions outside the training hull.
    """
    out = {}
    for flavor, enforce in (("constrained", True), ("unconstrained", False)):
        model = make_model(enforce)
        best, record = train(model, train_path, dataset, cfg)
        errors = evaluate_extrapolation(best, train_path, test_path, reference)
        r_max, u_max = training_hull(best, train_path)
        r_grid = np.linspace(r_max * 1.05, r_max * 3.0, 160)
        u_grid = np.linspace(u_max * 1.05, u_max * 3.0, 160)
        out[flavor] = {
            "record": record,
            "model": best,
            "errors": errors,
            "violations": constraint_violations(best, r_grid, u_grid),
        }
    return out


# ---------------------------------------------------------------------------
# phenomenological parameter fitting (comparison baseline)
# ---------------------------------------------------------------------------

def fit_phenomenological(dataset, bounds, seed, path, base=None, cfg=None):
    """Gradient-descent fit of the six single-NLK hardening constants.

    The starting guess is sampled uniformly inside the bounds; the same
    loss, optimizer and adjoint machinery as the surrogate training are
    used, with every parameter in the material group.  Parameters are
    clamped to their bounds after each step.
    """
    base = base or SingleNlkParams()
    cfg = cfg or TrainConfig(iterations=600)
    rng = np.random.default_rng(seed)
    names = ("C", "gamma", "m", "H1", "H2", "H3")
    start = {k: rng.uniform(bounds.lower[k], bounds.upper[k]) for k in names}
    params = SingleNlkParams(E=base.E, nu=base.nu, sigma_y=base.sigma_y,
                             **start)
    model = SingleNlkModel(params)
    model.set_fit_bounds(bounds)
    best, record = train(model, path, dataset, cfg)
    return best.current_params(), record
