"""Independent 1D sub-stepped integrators used as test oracles.

These drive the uniaxial effective quantities directly (stress, 1D
backstress shifts, accumulated plastic strain) with explicit forward-Euler
rate integration at very fine substeps.  They share no code with the
implicit 6-component return map they are used to check.

Conventions: ``xs_i`` is the uniaxial stress shift of backstress i (equal
to 1.5 X_11,i for a deviatoric backstress tensor), so the kinematic drive
modulus A_i is directly the uniaxial hardening slope d sigma / d eps_p.
"""

from __future__ import annotations

import numpy as np


def oracle_uniaxial(E, sigma_y, targets, n_sub, R_fn=None, dR_fn=None,
                    backstresses=(), chaboche_iso=None):
    """Explicit fine-step integration of a 1D elastoplastic law.

    ``backstresses`` is a sequence of (A, B) pairs with drive modulus A and
    recall-rate function B(xs) >= 0:  xs_dot = A s p_dot - B(xs) xs p_dot.
    ``R_fn``/``dR_fn`` give additive Voce-style isotropic hardening R(r);
    ``chaboche_iso`` = (b, Q_fn) switches to the rate form
    R_dot = b (Q(q) - R) p_dot with q the running max of |eps_p|.

    Returns (eps_targets, sigma_at_targets) matching the target grid.
    """
    R_fn = R_fn or (lambda r: 0.0)
    dR_fn = dR_fn or (lambda r: 0.0)
    eps = 0.0
    eps_p = 0.0
    r = 0.0
    R_state = 0.0
    q = 0.0
    xs = [0.0 for _ in backstresses]
    out = []
    pos = 0.0
    for tgt in targets:
        seg = np.linspace(pos, tgt, n_sub + 1)[1:]
        for e_next in seg:
            de = e_next - eps
            sigma_trial = E * (e_next - eps_p)
            xs_tot = sum(xs)
            R_iso = R_state if chaboche_iso else R_fn(r)
            rel = sigma_trial - xs_tot
            s = 1.0 if rel >= 0.0 else -1.0
            f = s * rel - sigma_y - R_iso
            if f > 0.0:
                if chaboche_iso:
                    b, Q_fn = chaboche_iso
                    dRdp = b * (Q_fn(q) - R_state)
                else:
                    dRdp = dR_fn(r)
                denom = E + sum(A for A, _ in backstresses) \
                    - s * sum(B(x) * x for (_, B), x in zip(backstresses, xs)) \
                    + dRdp
                dp = s * E * de / denom
                if dp > 0.0:
                    eps_p += s * dp
                    r += dp
                    for i, (A, B) in enumerate(backstresses):
                        xs[i] += A * s * dp - B(xs[i]) * xs[i] * dp
                    if chaboche_iso:
                        b, Q_fn = chaboche_iso
                        R_state += b * (Q_fn(q) - R_state) * dp
                        q = max(q, abs(eps_p))
            eps = e_next
        out.append(E * (eps - eps_p))
        pos = tgt
    return np.asarray(list(targets)), np.asarray(out)


def expand_targets(segments):
    """Per-increment targets of a (target, n_increments) segment list."""
    out = []
    pos = 0.0
    for tgt, n in segments:
        out.extend(np.linspace(pos, tgt, n + 1)[1:])
        pos = tgt
    return np.asarray(out)
