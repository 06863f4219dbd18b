"""Prescribed uniaxial loading paths shared by data generation and training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LoadingPath:
    """Ordered (eps11 target, increment count) segments starting from zero."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(t), int(n)) for t, n in self.segments)
        if not segs or any(n < 1 for _, n in segs):
            raise ValueError("every segment needs at least one increment")
        object.__setattr__(self, "segments", segs)

    @property
    def n_increments(self):
        return sum(n for _, n in self.segments)

    def targets(self):
        """Per-increment eps11 targets (length n_increments, no 0-row)."""
        out = []
        pos = 0.0
        for tgt, n in self.segments:
            out.extend(np.linspace(pos, tgt, n + 1)[1:])
            pos = tgt
        return np.asarray(out)

    def arc(self):
        """Cumulative |d eps11| at each target (0-row excluded)."""
        t = self.targets()
        steps = np.abs(np.diff(np.concatenate([[0.0], t])))
        return np.cumsum(steps)

    def extended(self, extra_segments):
        """Path with additional segments appended (testing extension)."""
        return LoadingPath(self.segments + tuple(extra_segments))


def three_pull_path(amplitude=0.0125, n_per_amp=125):
    """Load to +amplitude three times with two full reversals in between."""
    return LoadingPath((
        (amplitude, n_per_amp),
        (-amplitude, 2 * n_per_amp),
        (amplitude, 2 * n_per_amp),
        (-amplitude, 2 * n_per_amp),
        (amplitude, 2 * n_per_amp),
    ))


def extension_segments(amplitude=0.0125, n_per_amp=125):
    """Two further reverse-loading phases used for extrapolation testing."""
    return ((-amplitude, 2 * n_per_amp), (amplitude, 2 * n_per_amp))
