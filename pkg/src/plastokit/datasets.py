"""Uniaxial stress-strain datasets: containers, CSV round trip, ingestion."""

from __future__ import annotations

import numpy as np

from .errors import EmptyDataset, NonFiniteValue, ParseError, PathOutsideData


class UniaxialDataset:
    """Ordered (eps11, sig11) samples with reversal-branch markers.

    Samples are indexed by cumulative arc position (monotone along the
    path even when eps11 itself reverses); interpolation happens on that
    coordinate, so each reversal branch is interpolated within itself.
    """

    def __init__(self, eps, sig):
        self.eps = np.asarray(eps, dtype=float)
        self.sig = np.asarray(sig, dtype=float)
        if self.eps.shape != self.sig.shape or self.eps.ndim != 1:
            raise ValueError("eps and sig must be equal-length 1-d arrays")
        if self.eps.size == 0:
            raise EmptyDataset("dataset has no rows")
        if not (np.all(np.isfinite(self.eps)) and np.all(np.isfinite(self.sig))):
            raise NonFiniteValue("dataset contains non-finite values")
        steps = np.diff(self.eps)
        self.arc = np.concatenate([[0.0], np.cumsum(np.abs(steps))])
        self.branches = self._detect_branches(steps)

    @staticmethod
    def _detect_branches(steps):
        """Index ranges of monotone loading branches (sign changes split)."""
        if steps.size == 0:
            return [(0, 1)]
        signs = np.sign(steps)
        # carry the previous direction through zero-length steps
        for i in range(1, signs.size):
            if signs[i] == 0.0:
                signs[i] = signs[i - 1]
        out = []
        start = 0
        for i in range(1, signs.size):
            if signs[i] != 0.0 and signs[i - 1] != 0.0 and signs[i] != signs[i - 1]:
                out.append((start, i + 1))
                start = i
        out.append((start, signs.size + 1))
        return out

    @property
    def n_branches(self):
        return len(self.branches)

    def interp_sigma(self, arc_positions):
        """Piecewise-linear sigma11 lookup at given arc positions.

        Raises :class:`PathOutsideData` when a position leaves the hull.
        """
        a = np.asarray(arc_positions, dtype=float)
        tol = 1e-12 * max(1.0, self.arc[-1])
        if np.any(a < -tol) or np.any(a > self.arc[-1] + tol):
            raise PathOutsideData(
                f"requested arc position up to {a.max():.6g} exceeds the "
                f"dataset hull {self.arc[-1]:.6g}")
        return np.interp(np.clip(a, 0.0, self.arc[-1]), self.arc, self.sig)


def write_dataset_csv(path, steps, eps, sig):
    """Write `step,eps11,sig11` rows at full precision, LF endings."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("step,eps11,sig11\n")
        for s, e, g in zip(steps, eps, sig):
            fh.write(f"{int(s)},{float(e)!r},{float(g)!r}\n")


def load_dataset(path):
    """Read a uniaxial dataset CSV into a :class:`UniaxialDataset`.

    Accepts the ingestion layout `eps11,sig11` as well as the generator
    output `step,eps11,sig11`; rows must arrive in acquisition order.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise EmptyDataset(f"{path}: file is empty")
    header = [h.strip().lower() for h in lines[0].split(",")]
    try:
        ie, isig = header.index("eps11"), header.index("sig11")
    except ValueError as exc:
        raise ParseError(f"{path}: header must name eps11 and sig11 columns, "
                         f"got {lines[0]!r}") from exc
    eps, sig = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        fields = ln.split(",")
        if len(fields) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} "
                             f"fields, got {len(fields)}")
        try:
            e, s = float(fields[ie]), float(fields[isig])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: malformed number") from exc
        if not (np.isfinite(e) and np.isfinite(s)):
            raise NonFiniteValue(f"{path}:{lineno}: non-finite value")
        eps.append(e)
        sig.append(s)
    if not eps:
        raise EmptyDataset(f"{path}: no data rows")
    return UniaxialDataset(np.asarray(eps), np.asarray(sig))
