"""Fixed-bin-count gray-level discretization of an ROI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..volume import Mask, Volume, require_same_geometry

__all__ = ["DiscretizedRoi", "discretize", "DEFAULT_BIN_COUNT"]

DEFAULT_BIN_COUNT = 32


@dataclass(frozen=True)
class DiscretizedRoi:
    """Integer gray levels (1..ng inside the mask, 0 outside) on the ROI grid."""

    levels: np.ndarray
    mask: np.ndarray
    ng: int
    spacing: tuple[float, float, float]

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.int32)
        mask = np.asarray(self.mask, dtype=bool)
        if levels.shape != mask.shape or levels.ndim != 3:
            raise ValidationError("levels and mask must be matching 3D arrays")
        if not mask.any():
            raise ValidationError("empty mask")
        inside = levels[mask]
        if inside.min() < 1 or inside.max() > self.ng:
            raise ValidationError("foreground levels must lie in [1, ng]")
        levels = levels.copy()
        levels[~mask] = 0
        levels.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def foreground_count(self) -> int:
        return int(self.mask.sum())


def discretize(v: Volume, m: Mask, ng: int = DEFAULT_BIN_COUNT) -> DiscretizedRoi:
    """Bin foreground intensities into ng equal-width levels.

    level = floor((x - min) / ((max - min) / ng)) + 1, clamped to ng; a
    constant ROI maps every voxel to level 1.
    """
    if ng < 2:
        raise ValidationError("ng must be >= 2")
    require_same_geometry(v, m)
    if not m.data.any():
        raise ValidationError("empty mask")
    vals = v.data[m.data]
    lo, hi = float(vals.min()), float(vals.max())
    levels = np.zeros(v.dims, dtype=np.int32)
    if hi == lo:
        levels[m.data] = 1
    else:
        width = (hi - lo) / ng
        lv = np.floor((vals - lo) / width).astype(np.int32) + 1
        np.clip(lv, 1, ng, out=lv)
        levels[m.data] = lv
    return DiscretizedRoi(levels=levels, mask=m.data, ng=int(ng), spacing=v.spacing)
