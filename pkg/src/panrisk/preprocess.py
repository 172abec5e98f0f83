"""Intensity cleanup: homomorphic bias correction, median denoising, and
landmark-based intensity standardization.

The standardization step learns a piecewise-linear map from image-specific
intensity percentiles onto a common scale, so images from different scanners
share a reference distribution before feature extraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ValidationError
from .util import percentile
from .volume import Mask, Volume

__all__ = [
    "correct_bias",
    "denoise_median",
    "NyulModel",
    "nyul_train",
    "nyul_apply",
    "DEFAULT_RANKS",
    "DEFAULT_SCALE_BOUNDS",
]

DEFAULT_RANKS = (1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 99.0)
DEFAULT_SCALE_BOUNDS = (0.0, 100.0)


def correct_bias(v: Volume, sigma_mm: float = 30.0) -> Volume:
    """Remove a smooth multiplicative field by log-domain Gaussian unsharping.

    The field estimate is a Gaussian blur of ln(1+v) with physical-space sigma;
    its mean is added back so the overall intensity level is preserved.
    Constant volumes pass through unchanged (up to float rounding).
    """
    if sigma_mm <= 0:
        raise ValidationError("sigma_mm must be positive")
    if np.any(v.data < 0):
        raise ValidationError("bias correction requires non-negative intensities")
    log_img = np.log1p(v.data)
    sigma_vox = [sigma_mm / s for s in v.spacing]
    field = gaussian_filter(log_img, sigma=sigma_vox, mode="reflect")
    out = np.expm1(log_img - field + field.mean())
    np.clip(out, 0.0, None, out=out)
    return replace(v, data=out)


def denoise_median(v: Volume, radius_vox: int = 1) -> Volume:
    """Replace each voxel by the median of its (2r+1)^3 neighborhood.

    Neighborhoods are clipped at the grid boundary. For even-sized clipped
    neighborhoods the lower median is taken, so every output value is an
    input value.
    """
    r = int(radius_vox)
    if r < 1:
        raise ValidationError("radius_vox must be >= 1")
    w = 2 * r + 1
    padded = np.pad(v.data, r, mode="constant", constant_values=np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (w, w, w))
    nx = v.dims[0]
    out = np.empty(v.dims, dtype=np.float64)
    # sort copies the window block; chunk along x to bound memory
    chunk = max(1, int(4e6 // (v.dims[1] * v.dims[2] * w**3)) or 1)
    for x0 in range(0, nx, chunk):
        x1 = min(nx, x0 + chunk)
        block = windows[x0:x1].reshape(x1 - x0, v.dims[1], v.dims[2], w**3)
        ordered = np.sort(block, axis=-1)  # NaN sorts last
        valid = w**3 - np.isnan(block).sum(axis=-1)
        pick = (valid - 1) // 2
        out[x0:x1] = np.take_along_axis(ordered, pick[..., None], axis=-1)[..., 0]
    return replace(v, data=out)


@dataclass(frozen=True)
class NyulModel:
    """Learned landmark map: percentile ranks and their standard-scale values."""

    ranks: tuple[float, ...]
    standard_landmarks: tuple[float, ...]
    scale_bounds: tuple[float, float]

    def __post_init__(self):
        ranks = tuple(float(r) for r in self.ranks)
        lms = tuple(float(x) for x in self.standard_landmarks)
        bounds = (float(self.scale_bounds[0]), float(self.scale_bounds[1]))
        if len(ranks) < 3:
            raise ValidationError("need at least 3 landmark ranks")
        if len(ranks) != len(lms):
            raise ValidationError("rank and landmark counts differ")
        if any(not 0 < r < 100 for r in ranks):
            raise ValidationError("ranks must lie in (0, 100)")
        if any(b >= a for a, b in zip(ranks[1:], ranks)):
            raise ValidationError("ranks must be strictly increasing")
        if any(b >= a for a, b in zip(lms[1:], lms)):
            raise ValidationError("standard landmarks must be strictly increasing")
        if bounds[0] >= bounds[1]:
            raise ValidationError("scale_bounds must be increasing")
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "standard_landmarks", lms)
        object.__setattr__(self, "scale_bounds", bounds)

    def to_dict(self) -> dict:
        return {
            "ranks": list(self.ranks),
            "standard_landmarks": list(self.standard_landmarks),
            "scale_bounds": list(self.scale_bounds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NyulModel":
        return cls(
            ranks=tuple(d["ranks"]),
            standard_landmarks=tuple(d["standard_landmarks"]),
            scale_bounds=(d["scale_bounds"][0], d["scale_bounds"][1]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "NyulModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _image_landmarks(v: Volume, mask: Mask | None, ranks) -> np.ndarray:
    values = v.data[mask.data] if mask is not None else v.data.ravel()
    if values.size == 0:
        raise ValidationError("no voxels available for landmark estimation")
    lms = percentile(values, list(ranks))
    if lms[-1] <= lms[0]:
        raise ValidationError(
            "degenerate image: tail percentiles coincide, cannot standardize"
        )
    return np.asarray(lms, dtype=np.float64)


def _map_to_scale(lms: np.ndarray, bounds) -> np.ndarray:
    lo, hi = bounds
    return lo + (lms - lms[0]) * (hi - lo) / (lms[-1] - lms[0])


def nyul_train(
    images,
    masks=None,
    ranks=DEFAULT_RANKS,
    scale_bounds=DEFAULT_SCALE_BOUNDS,
) -> NyulModel:
    """Learn standard landmarks as the per-rank mean of scale-mapped percentiles."""
    images = list(images)
    if len(images) < 2:
        raise ValidationError("landmark training needs at least 2 images")
    if masks is not None:
        masks = list(masks)
        if len(masks) != len(images):
            raise ValidationError("images and masks counts differ")
    mapped = []
    for i, img in enumerate(images):
        m = masks[i] if masks is not None else None
        mapped.append(_map_to_scale(_image_landmarks(img, m, ranks), scale_bounds))
    standard = np.mean(np.stack(mapped), axis=0)
    if np.any(np.diff(standard) <= 0):
        raise ValidationError("training produced non-increasing standard landmarks")
    return NyulModel(
        ranks=tuple(ranks),
        standard_landmarks=tuple(standard.tolist()),
        scale_bounds=(float(scale_bounds[0]), float(scale_bounds[1])),
    )


def nyul_apply(v: Volume, model: NyulModel, mask: Mask | None = None) -> Volume:
    """Map intensities so the image's landmark percentiles hit the standard ones.

    The map is piecewise linear through (own percentile, standard landmark)
    pairs, extrapolated beyond the tails with the terminal segment slopes.
    Tied percentiles are merged (standard values averaged), keeping the map
    monotone non-decreasing.
    """
    own = _image_landmarks(v, mask, model.ranks)
    std = np.asarray(model.standard_landmarks, dtype=np.float64)

    # merge runs of equal own-percentile values
    xs, fs = [], []
    i = 0
    while i < len(own):
        j = i
        while j + 1 < len(own) and own[j + 1] == own[i]:
            j += 1
        xs.append(own[i])
        fs.append(std[i : j + 1].mean())
        i = j + 1
    xs = np.asarray(xs)
    fs = np.asarray(fs)

    data = v.data
    out = np.interp(data, xs, fs)
    slope_lo = (fs[1] - fs[0]) / (xs[1] - xs[0])
    slope_hi = (fs[-1] - fs[-2]) / (xs[-1] - xs[-2])
    below = data < xs[0]
    above = data > xs[-1]
    if below.any():
        out[below] = fs[0] + (data[below] - xs[0]) * slope_lo
    if above.any():
        out[above] = fs[-1] + (data[above] - xs[-1]) * slope_hi
    return replace(v, data=out)
