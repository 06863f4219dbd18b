"""Minimal small-strain 3D finite-element driver (8-node hexahedra).

Displacement-controlled Punch and Cook's-membrane benchmarks comparing a
reference constitutive model against the trained surrogate.  Standard
B-matrix assembly with 2x2x2 Gauss quadrature, dense direct solves (the
meshes stay well under a thousand DOFs) and the consistent material
tangent at every Gauss point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensors as tn
from .errors import GlobalNoConvergence, NoConvergence

_GP = 1.0 / np.sqrt(3.0)
_GAUSS = np.array([[sx * _GP, sy * _GP, sz * _GP]
                   for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)])
_CORNERS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)


def _shape_gradients(xi):
    """d N_i / d xi for the trilinear hexahedron (8 x 3)."""
    g = np.empty((8, 3))
    for i, (a, b, c) in enumerate(_CORNERS):
        g[i, 0] = a * (1 + b * xi[1]) * (1 + c * xi[2]) / 8.0
        g[i, 1] = (1 + a * xi[0]) * b * (1 + c * xi[2]) / 8.0
        g[i, 2] = (1 + a * xi[0]) * (1 + b * xi[1]) * c / 8.0
    return g


class Mesh:
    """Hexahedral mesh with named Dirichlet node sets."""

    def __init__(self, nodes, hexes, dirichlet=None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.hexes = np.asarray(hexes, dtype=int)
        self.dirichlet = dirichlet or {}
        if self.hexes.min() < 0 or self.hexes.max() >= len(self.nodes):
            raise ValueError("connectivity index out of range")

    @property
    def n_dof(self):
        return 3 * len(self.nodes)

    def element_quadrature(self, e):
        """Per-Gauss-point (B, detJ * weight) for element ``e``.

        Raises ValueError on non-positive Jacobians.
        """
        xe = self.nodes[self.hexes[e]]
        out = []
        for xi in _GAUSS:
            dN = _shape_gradients(xi)
            J = xe.T @ dN
            detJ = np.linalg.det(J)
            if detJ <= 0.0:
                raise ValueError(f"non-positive Jacobian in element {e}")
            dNdx = dN @ np.linalg.inv(J)
            B = np.zeros((6, 24))
            for i in range(8):
                bx, by, bz = dNdx[i]
                cols = slice(3 * i, 3 * i + 3)
                B[0, 3 * i + 0] = bx
                B[1, 3 * i + 1] = by
                B[2, 3 * i + 2] = bz
                B[3, 3 * i + 0] = 0.5 * by
                B[3, 3 * i + 1] = 0.5 * bx
                B[4, 3 * i + 0] = 0.5 * bz
                B[4, 3 * i + 2] = 0.5 * bx
                B[5, 3 * i + 1] = 0.5 * bz
                B[5, 3 * i + 2] = 0.5 * by
            out.append((B, detJ))
        return out

    def gauss_points(self):
        """Global coordinates of every (element, gp) pair."""
        pts = []
        for e in range(len(self.hexes)):
            xe = self.nodes[self.hexes[e]]
            for xi in _GAUSS:
                N = np.array([(1 + a * xi[0]) * (1 + b * xi[1])
                              * (1 + c * xi[2]) / 8.0
                              for a, b, c in _CORNERS])
                pts.append(N @ xe)
        return np.asarray(pts)


def _grid_nodes(xs, ys, zs):
    nodes = []
    index = {}
    for k, z in enumerate(zs):
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                index[(i, j, k)] = len(nodes)
                nodes.append((x, y, z))
    return np.asarray(nodes), index


def _grid_hexes(index, nx, ny, nz):
    hexes = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                hexes.append([index[(i, j, k)], index[(i + 1, j, k)],
                              index[(i + 1, j + 1, k)], index[(i, j + 1, k)],
                              index[(i, j, k + 1)], index[(i + 1, j, k + 1)],
                              index[(i + 1, j + 1, k + 1)],
                              index[(i, j + 1, k + 1)]])
    return np.asarray(hexes)


def punch_mesh(n=4):
    """Unit cube, bottom held vertically, top face pushed down.

    The probe corner (1, 1, 0) is a mesh node by construction.  One bottom
    edge is pinned against rigid in-plane motion.
    """
    xs = np.linspace(0, 1, n + 1)
    nodes, index = _grid_nodes(xs, xs, xs)
    hexes = _grid_hexes(index, n, n, n)
    tol = 1e-9
    bottom = np.where(nodes[:, 2] < tol)[0]
    top = np.where(nodes[:, 2] > 1 - tol)[0]
    origin = np.where((nodes[:, 0] < tol) & (nodes[:, 1] < tol)
                      & (nodes[:, 2] < tol))[0]
    xaxis = np.where((nodes[:, 0] > 1 - tol) & (nodes[:, 1] < tol)
                     & (nodes[:, 2] < tol))[0]
    dirichlet = {
        "bottom_uz": (bottom, 2, 0.0),
        "pin_xy": (origin, 0, 0.0),
        "pin_y": (np.concatenate([origin, xaxis]), 1, 0.0),
        "top_uz": (top, 2, None),      # ramped to the applied displacement
    }
    return Mesh(nodes, hexes, dirichlet)


def cook_mesh(nx=8, ny=8, nz=1):
    """Tapered Cook panel: 48 long, 44 left edge, 16 right edge, thickness 1.

    Left face clamped, right face displaced vertically.
    """
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    zs = np.linspace(0.0, 1.0, nz + 1)
    nodes = []
    index = {}
    for k, z in enumerate(zs):
        for j, yy in enumerate(ys):
            for i, xx in enumerate(xs):
                x = 48.0 * xx
                y_bot = 44.0 * xx
                y_top = 44.0 + 16.0 * xx
                index[(i, j, k)] = len(nodes)
                nodes.append((x, y_bot + (y_top - y_bot) * yy, z))
    nodes = np.asarray(nodes)
    hexes = _grid_hexes(index, nx, ny, nz)
    tol = 1e-9
    left = np.where(nodes[:, 0] < tol)[0]
    right = np.where(nodes[:, 0] > 48.0 - tol)[0]
    dirichlet = {
        "left_ux": (left, 0, 0.0),
        "left_uy": (left, 1, 0.0),
        "left_uz": (left, 2, 0.0),
        "right_uy": (right, 1, None),
    }
    return Mesh(nodes, hexes, dirichlet)


@dataclass
class FemConfig:
    """Benchmark setup; defaults follow the published loading protocols."""

    benchmark: str = "punch"
    u0: float = None
    n_increments: int = 10
    max_iterations: int = 12
    divisions: int = None
    rel_tol: float = 1e-6
    probe_point: tuple = None

    def __post_init__(self):
        if self.benchmark not in ("punch", "cook"):
            raise ValueError(f"unknown benchmark {self.benchmark!r}")
        if self.u0 is None:
            self.u0 = -0.015 if self.benchmark == "punch" else 0.3
        if self.divisions is None:
            self.divisions = 4 if self.benchmark == "punch" else 8
        if self.probe_point is None:
            self.probe_point = (1.0, 1.0, 0.0) if self.benchmark == "punch" \
                else (48.0, 52.0, 0.5)

    def build_mesh(self):
        if self.benchmark == "punch":
            return punch_mesh(self.divisions)
        return cook_mesh(self.divisions, self.divisions, 1)

    @property
    def ramp_set(self):
        return "top_uz" if self.benchmark == "punch" else "right_uy"


@dataclass
class ConvergenceLog:
    """Per-increment relative residual norms (first entry is 1)."""

    increments: list = field(default_factory=list)

    def add(self, relres):
        self.increments.append(list(relres))

    def iterations_per_increment(self):
        return [len(r) for r in self.increments]

    def write_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("increment,iter,relres\n")
            for inc, rr in enumerate(self.increments, start=1):
                for it, v in enumerate(rr):
                    fh.write(f"{inc},{it},{float(v)!r}\n")


@dataclass
class BenchmarkResult:
    u: np.ndarray
    mesh: Mesh
    log: ConvergenceLog
    probe: list                  # (increment, strain_norm, stress_norm)
    gp_history: list             # per increment arrays of (vol, |eps|, |sig|)
    dissipation: float

    def write_probe_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("increment,strain_norm,stress_norm\n")
            for inc, en, sn in self.probe:
                fh.write(f"{inc},{float(en)!r},{float(sn)!r}\n")

    def write_field_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("node,x,y,z,ux,uy,uz\n")
            for i, (x, y, z) in enumerate(self.mesh.nodes):
                ux, uy, uz = self.u[3 * i:3 * i + 3]
                fh.write(f"{i},{float(x)!r},{float(y)!r},{float(z)!r},"
                         f"{float(ux)!r},{float(uy)!r},{float(uz)!r}\n")


def assemble(mesh, u, model, states, quadrature):
    """Internal force, tangent stiffness and trial states at displacement u.

    Return-map failures are re-raised with the offending element and Gauss
    point identified.
    """
    ndof = mesh.n_dof
    f_int = np.zeros(ndof)
    K = np.zeros((ndof, ndof))
    trial = [[None] * 8 for _ in range(len(mesh.hexes))]
    W = np.diag(tn.W6)
    for e in range(len(mesh.hexes)):
        dofs = np.concatenate([[3 * n, 3 * n + 1, 3 * n + 2]
                               for n in mesh.hexes[e]])
        ue = u[dofs]
        fe = np.zeros(24)
        Ke = np.zeros((24, 24))
        for g, (B, detJ) in enumerate(quadrature[e]):
            eps = B @ ue
            state = states[e][g]
            deps = eps - (state.eps_e + state.eps_p)
            try:
                new_state, sigma, inc, info = \
                    model.integrate_strain_controlled(state, deps)
            except NoConvergence as exc:
                raise NoConvergence(
                    f"element {e}, gauss point {g}: {exc}") from exc
            D = model.consistent_tangent(info)
            trial[e][g] = new_state
            fe += B.T @ (W @ sigma) * detJ
            Ke += B.T @ (W @ D) @ B * detJ
        f_int[dofs] += fe
        K[np.ix_(dofs, dofs)] += Ke
    return f_int, K, trial


def run_benchmark(cfg, model):
    """Displacement-ramped quasi-static run; returns a BenchmarkResult."""
    mesh = cfg.build_mesh()
    quadrature = [mesh.element_quadrature(e) for e in range(len(mesh.hexes))]
    states = [[model.initial_state() for _ in range(8)]
              for _ in range(len(mesh.hexes))]
    ndof = mesh.n_dof
    u = np.zeros(ndof)

    fixed = {}
    for name, (nodes, comp, value) in mesh.dirichlet.items():
        for n in nodes:
            fixed[3 * n + comp] = (name, value)
    fixed_dofs = np.array(sorted(fixed))

    probe_idx = int(np.argmin(np.linalg.norm(
        mesh.gauss_points() - np.asarray(cfg.probe_point), axis=1)))
    pe, pg = divmod(probe_idx, 8)

    log = ConvergenceLog()
    probe = []
    gp_history = []
    dissipation = 0.0

    for inc in range(1, cfg.n_increments + 1):
        ramp = inc / cfg.n_increments
        for dof, (name, value) in fixed.items():
            u[dof] = cfg.u0 * ramp if value is None else value
        relres = []
        norm0 = None
        trial = states
        for it in range(cfg.max_iterations + 1):
            f_int, K, trial = assemble(mesh, u, model, states, quadrature)
            R = -f_int
            R[fixed_dofs] = 0.0
            norm = float(np.linalg.norm(R))
            if norm0 is None:
                norm0 = max(norm, 1e-30)
            relres.append(norm / norm0)
            if relres[-1] <= cfg.rel_tol:
                break
            if it == cfg.max_iterations:
                raise GlobalNoConvergence(
                    f"increment {inc}: relative residual {relres[-1]:.3e} "
                    f"after {cfg.max_iterations} iterations")
            K[fixed_dofs, :] = 0.0
            K[:, fixed_dofs] = 0.0
            K[fixed_dofs, fixed_dofs] = 1.0
            du = np.linalg.solve(K, R)
            u += du
        log.add(relres)

        for e in range(len(mesh.hexes)):
            for g in range(8):
                old = states[e][g]
                new = trial[e][g]
                sigma = model.elastic.stress(new.eps_e)
                dlam = 0.0
                dissipation += model.dissipation_increment(old, new, sigma,
                                                           dlam)
                states[e][g] = new

        ps = states[pe][pg]
        eps_tot = ps.eps_e + ps.eps_p
        sig = model.elastic.stress(ps.eps_e)
        probe.append((inc, float(np.sqrt(tn.ddot(eps_tot, eps_tot))),
                      float(np.sqrt(tn.ddot(sig, sig)))))

        vols, ens, sns = [], [], []
        for e in range(len(mesh.hexes)):
            for g, (B, detJ) in enumerate(quadrature[e]):
                st = states[e][g]
                et = st.eps_e + st.eps_p
                sg = model.elastic.stress(st.eps_e)
                vols.append(detJ)
                ens.append(np.sqrt(tn.ddot(et, et)))
                sns.append(np.sqrt(tn.ddot(sg, sg)))
        gp_history.append((np.asarray(vols), np.asarray(ens),
                           np.asarray(sns)))

    return BenchmarkResult(u=u, mesh=mesh, log=log, probe=probe,
                           gp_history=gp_history, dissipation=dissipation)


def cook_summary(result):
    """Volume-weighted average strain/stress norm curve per increment."""
    out = []
    for inc, (vols, ens, sns) in enumerate(result.gp_history, start=1):
        w = vols / vols.sum()
        out.append((inc, float(w @ ens), float(w @ sns)))
    return out
