"""Shared numerics: the project-wide percentile definition and seeded RNG streams."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def percentile(values, q):
    """Percentile by linear interpolation between order statistics (inclusive).

    This is the single percentile definition used everywhere: first-order
    features, landmark training, and the 95th-percentile boundary distance.
    """
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0:
        raise ValidationError("percentile of empty sample")
    return np.percentile(a, q, method="linear")


def case_rng(seed: int, index: int) -> np.random.Generator:
    """Independent RNG stream for one case; parallel generation order never matters."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground voxels with at least one background 6-neighbor or on the grid edge."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 3:
        raise ValidationError("mask_boundary expects a 3D array")
    interior = np.zeros_like(m)
    if all(n > 2 for n in m.shape):
        core = (
            m[1:-1, 1:-1, 1:-1]
            & m[:-2, 1:-1, 1:-1] & m[2:, 1:-1, 1:-1]
            & m[1:-1, :-2, 1:-1] & m[1:-1, 2:, 1:-1]
            & m[1:-1, 1:-1, :-2] & m[1:-1, 1:-1, 2:]
        )
        interior[1:-1, 1:-1, 1:-1] = core
    return m & ~interior
