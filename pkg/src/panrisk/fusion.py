"""Confidence-gated weighted-average decision fusion.

When the radiomics classifier is confident (its max probability reaches the
gate threshold t) its vector is returned unchanged; otherwise the output is
the convex combination k * p_dl + (1 - k) * p_radiomics. Both pure
strategies are reachable from the default grids, which makes the selected
configuration at least as accurate as either pure classifier on the
selection set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

__all__ = [
    "FusionParams",
    "fuse",
    "fused_label",
    "fusion_grid_search",
    "validate_probability_vector",
    "default_k_grid",
    "default_t_grid",
]

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class FusionParams:
    """k weights the DL vector on the non-gated branch; t is the gate threshold."""

    k: float
    t: float

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ValidationError(f"k must lie in [0, 1], got {self.k}")
        if not 0.0 < self.t <= 1.01:
            raise ValidationError(f"t must lie in (0, 1.01], got {self.t}")


def validate_probability_vector(p, name: str = "probability vector") -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValidationError(f"{name} must be a 1D vector of >= 2 classes")
    if np.any(p < -_SUM_TOL) or np.any(p > 1.0 + _SUM_TOL):
        raise ValidationError(f"{name} components outside [0, 1]: {p}")
    if abs(float(p.sum()) - 1.0) > _SUM_TOL:
        raise ValidationError(f"{name} sums to {p.sum()}, expected 1")
    return p


def fuse(p_dl, p_radiomics, params: FusionParams) -> np.ndarray:
    """Gate on max(p_radiomics) >= t, else k * p_dl + (1 - k) * p_radiomics."""
    pd = validate_probability_vector(p_dl, "DL vector")
    pr = validate_probability_vector(p_radiomics, "radiomics vector")
    if pd.size != pr.size:
        raise ValidationError("fusion inputs have different class counts")
    if float(pr.max()) >= params.t:
        return pr.copy()
    return params.k * pd + (1.0 - params.k) * pr


def fused_label(p_dl, p_radiomics, params: FusionParams) -> int:
    """Argmax of the fused vector; ties resolve to the lowest class index."""
    return int(np.argmax(fuse(p_dl, p_radiomics, params)))


def default_k_grid() -> list[float]:
    return [round(i / 10, 1) for i in range(11)]


def default_t_grid() -> list[float]:
    return [round(0.34 + 0.06 * i, 2) for i in range(12)] + [1.01]


def _check_pure_points(k_grid, t_grid):
    pure_radiomics = (0.0 in k_grid) or (min(t_grid) <= 1.0 / 3.0)
    pure_dl = (1.0 in k_grid) and (max(t_grid) > 1.0)
    if not pure_radiomics:
        raise ConfigError("fusion grid must reach pure radiomics (k=0 or t <= 1/3)")
    if not pure_dl:
        raise ConfigError("fusion grid must reach pure DL (k=1 with t > 1)")


def fusion_grid_search(p_dl, p_radiomics, labels, k_grid=None, t_grid=None):
    """Pick (k, t) maximizing fused argmax accuracy over the given pairs.

    Ties resolve to the smallest t, then the smallest k. Returns
    (FusionParams, results) with one row per grid point.
    """
    k_grid = default_k_grid() if k_grid is None else sorted(set(float(k) for k in k_grid))
    t_grid = default_t_grid() if t_grid is None else sorted(set(float(t) for t in t_grid))
    _check_pure_points(k_grid, t_grid)

    pd = np.asarray(p_dl, dtype=np.float64)
    pr = np.asarray(p_radiomics, dtype=np.float64)
    y = np.asarray(labels)
    if pd.ndim != 2 or pd.shape != pr.shape or len(y) != len(pd):
        raise ValidationError("need matching (n, k) probability arrays and n labels")
    if len(y) == 0:
        raise ValidationError("empty fusion selection set")
    for row in range(len(y)):
        validate_probability_vector(pd[row], f"DL row {row}")
        validate_probability_vector(pr[row], f"radiomics row {row}")

    max_pr = pr.max(axis=1)
    results = []
    best = None
    for t in t_grid:
        gate = max_pr >= t
        for k in k_grid:
            mixed = k * pd + (1.0 - k) * pr
            fused = np.where(gate[:, None], pr, mixed)
            preds = np.argmax(fused, axis=1)
            acc = float((preds == y).mean())
            results.append({"k": k, "t": t, "accuracy": acc})
            if best is None or acc > best[0]:
                best = (acc, FusionParams(k=k, t=t))
    return best[1], results
