"""Volumetric image containers and exact geometric operations.

Volumes and masks are immutable after construction; every operation returns a
new instance, so values can be shared freely across worker processes. The
direction matrix holds one unit column per voxel axis; the physical position
of voxel (i, j, k) is ``origin + direction @ (spacing * (i, j, k))``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

__all__ = [
    "Volume",
    "Mask",
    "RoiBox",
    "same_geometry",
    "require_same_geometry",
    "reorient_ras",
    "resample_isotropic",
    "mask_bounding_box",
    "crop_roi",
]


def _frozen_array(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_geometry(data, spacing, direction, origin):
    if data.ndim != 3:
        raise ValidationError(f"expected a 3D array, got {data.ndim}D")
    if len(spacing) != 3 or any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise ValidationError(f"spacing must be 3 positive reals, got {spacing}")
    if direction.shape != (3, 3) or not np.all(np.isfinite(direction)):
        raise ValidationError("direction must be a finite 3x3 matrix")
    norms = np.linalg.norm(direction, axis=0)
    if not np.allclose(norms, 1.0, atol=1e-6):
        raise ValidationError(f"direction columns must be unit-norm, norms={norms}")
    if origin.shape != (3,) or not np.all(np.isfinite(origin)):
        raise ValidationError("origin must be a finite 3-vector")


@dataclass(frozen=True)
class Volume:
    """Dense 3D scalar image with physical spacing and orientation metadata."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    direction: np.ndarray = None
    origin: np.ndarray = None

    def __post_init__(self):
        data = _frozen_array(self.data, np.float64)
        direction = _frozen_array(
            np.eye(3) if self.direction is None else self.direction, np.float64
        )
        origin = _frozen_array(
            np.zeros(3) if self.origin is None else self.origin, np.float64
        )
        spacing = tuple(float(s) for s in self.spacing)
        _check_geometry(data, spacing, direction, origin)
        if not np.all(np.isfinite(data)):
            raise ValidationError("volume contains NaN or Inf voxels")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "origin", origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def voxel_volume_mm3(self) -> float:
        return float(np.prod(self.spacing))


@dataclass(frozen=True)
class Mask:
    """Binary voxel labeling sharing the geometry of its paired volume."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    direction: np.ndarray = None
    origin: np.ndarray = None

    def __post_init__(self):
        data = _frozen_array(self.data, bool)
        direction = _frozen_array(
            np.eye(3) if self.direction is None else self.direction, np.float64
        )
        origin = _frozen_array(
            np.zeros(3) if self.origin is None else self.origin, np.float64
        )
        spacing = tuple(float(s) for s in self.spacing)
        _check_geometry(data, spacing, direction, origin)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "origin", origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def voxel_volume_mm3(self) -> float:
        return float(np.prod(self.spacing))

    def foreground_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class RoiBox:
    """Axis-aligned voxel box, lo inclusive / hi exclusive."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]
    margin_vox: int = 0

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if self.margin_vox < 0:
            raise ValidationError("margin_vox must be non-negative")
        if any(l >= h for l, h in zip(lo, hi)):
            raise ValidationError(f"RoiBox requires lo < hi per axis, got {lo} {hi}")
        if any(l < 0 for l in lo):
            raise ValidationError(f"RoiBox lo must be non-negative, got {lo}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))


def same_geometry(a, b) -> bool:
    """Exact equality of dims, spacing, direction, and origin."""
    return (
        a.dims == b.dims
        and a.spacing == b.spacing
        and np.array_equal(a.direction, b.direction)
        and np.array_equal(a.origin, b.origin)
    )


def require_same_geometry(a, b):
    if not same_geometry(a, b):
        raise ValidationError(
            f"geometry mismatch: dims {a.dims} vs {b.dims}, "
            f"spacing {a.spacing} vs {b.spacing}"
        )


def _signed_permutation(direction: np.ndarray):
    """Decompose an axis-aligned direction matrix into (source axis, sign) per world axis."""
    src = [-1, -1, -1]
    sign = [0, 0, 0]
    for col in range(3):
        row = int(np.argmax(np.abs(direction[:, col])))
        val = direction[row, col]
        others = np.delete(direction[:, col], row)
        if abs(abs(val) - 1.0) > 1e-6 or np.any(np.abs(others) > 1e-6):
            raise ValidationError(
                "oblique orientation is not supported; direction must be a signed axis permutation"
            )
        if src[row] != -1:
            raise ValidationError("degenerate direction matrix: repeated axis")
        src[row] = col
        sign[row] = 1 if val > 0 else -1
    return src, sign


def reorient_ras(img):
    """Permute and flip voxel axes so the direction matrix becomes the identity.

    Only signed axis permutations are accepted; oblique orientations raise.
    The voxel value multiset is unchanged.
    """
    src, sign = _signed_permutation(img.direction)
    if src == [0, 1, 2] and sign == [1, 1, 1]:
        return img

    data = np.transpose(img.data, axes=src)
    spacing = tuple(img.spacing[s] for s in src)
    corner = np.zeros(3)
    slicer = []
    for axis in range(3):
        if sign[axis] < 0:
            slicer.append(slice(None, None, -1))
            corner[src[axis]] = (img.dims[src[axis]] - 1) * img.spacing[src[axis]]
        else:
            slicer.append(slice(None))
    data = data[tuple(slicer)]
    origin = img.origin + img.direction @ corner
    return replace(img, data=np.ascontiguousarray(data), spacing=spacing,
                   direction=np.eye(3), origin=origin)


def _axis_interp_linear(data: np.ndarray, axis: int, f: np.ndarray) -> np.ndarray:
    n = data.shape[axis]
    i0 = np.floor(f).astype(np.int64)
    np.clip(i0, 0, n - 1, out=i0)
    i1 = np.minimum(i0 + 1, n - 1)
    w = f - i0
    a = np.take(data, i0, axis=axis)
    b = np.take(data, i1, axis=axis)
    shape = [1, 1, 1]
    shape[axis] = len(f)
    w = w.reshape(shape)
    # a + w*(b-a) keeps constants bit-exact
    return a + w * (b - a)


def resample_isotropic(img, target_mm: float, mode: str = "linear"):
    """Resample onto an isotropic grid of ``target_mm`` voxels.

    Output voxel j along an axis samples the input at fractional index
    ``j * target / spacing`` (clamped at the ends), so the first voxel centers
    coincide and identity resampling is exact. Masks must use nearest mode.
    """
    if target_mm <= 0:
        raise ValidationError("target_mm must be positive")
    if mode not in ("linear", "nearest"):
        raise ValidationError(f"unknown resample mode {mode!r}")
    if isinstance(img, Mask) and mode != "nearest":
        raise ValidationError("masks must be resampled with nearest mode")

    new_dims = tuple(
        max(1, int(np.ceil(n * s / target_mm))) for n, s in zip(img.dims, img.spacing)
    )
    fracs = [
        np.arange(new_dims[a], dtype=np.float64) * (target_mm / img.spacing[a])
        for a in range(3)
    ]
    for a in range(3):
        np.clip(fracs[a], 0.0, img.dims[a] - 1, out=fracs[a])

    if mode == "nearest":
        idx = [np.floor(fracs[a] + 0.5).astype(np.int64) for a in range(3)]
        for a in range(3):
            np.clip(idx[a], 0, img.dims[a] - 1, out=idx[a])
        data = img.data[np.ix_(*idx)]
    else:
        data = img.data.astype(np.float64)
        for a in range(3):
            data = _axis_interp_linear(data, a, fracs[a])

    return replace(img, data=data, spacing=(target_mm,) * 3)


def mask_bounding_box(m: Mask, margin_vox: int = 0) -> RoiBox:
    """Tightest box over foreground, dilated by margin_vox and clipped to bounds."""
    if margin_vox < 0:
        raise ValidationError("margin_vox must be non-negative")
    if not m.data.any():
        raise ValidationError("mask has no foreground voxels")
    idx = np.nonzero(m.data)
    lo = [max(0, int(ax.min()) - margin_vox) for ax in idx]
    hi = [min(m.dims[a], int(idx[a].max()) + 1 + margin_vox) for a in range(3)]
    return RoiBox(lo=tuple(lo), hi=tuple(hi), margin_vox=margin_vox)


def crop_roi(img, box: RoiBox):
    """Crop to the box; origin shifts by lo * spacing along the direction axes."""
    if any(h > n for h, n in zip(box.hi, img.dims)):
        raise ValidationError(f"RoiBox {box.lo}..{box.hi} exceeds volume dims {img.dims}")
    sl = tuple(slice(l, h) for l, h in zip(box.lo, box.hi))
    data = np.ascontiguousarray(img.data[sl])
    shift = np.array(box.lo, dtype=np.float64) * np.array(img.spacing)
    origin = img.origin + img.direction @ shift
    return replace(img, data=data, origin=origin)
