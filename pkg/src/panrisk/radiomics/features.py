"""The 107-feature radiomics vector: shape (14), first-order (18), and the
five texture families GLCM (24), GLRLM (16), GLSZM (16), GLDM (14), NGTDM (5).

Formulas follow the standard matrix-based definitions; each feature carries
its defining expression as a comment. Degenerate-ROI conventions, applied
uniformly so every vector stays finite:

* any feature whose denominator is zero evaluates to 0;
* entropies sum -p*log2(p) over positive entries only;
* NGTDM Coarseness is capped at 1e6;
* gray-level and dependence variables i, j are 1-based level values, and the
  GLDM dependence variable is (dependent-neighbor count + 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..util import mask_boundary, percentile
from ..volume import Mask, Volume, require_same_geometry
from .discretize import DEFAULT_BIN_COUNT, DiscretizedRoi, discretize
from .matrices import (
    cooccurrence_matrices,
    dependence_matrix,
    gray_tone_difference_table,
    run_length_matrices,
    size_zone_matrix,
)

__all__ = [
    "FeatureVector",
    "extract_feature_vector",
    "shape_features",
    "firstorder_features",
    "glcm_features",
    "glrlm_features",
    "glszm_features",
    "gldm_features",
    "ngtdm_features",
    "SHAPE_NAMES",
    "FIRSTORDER_NAMES",
    "GLCM_NAMES",
    "GLRLM_NAMES",
    "GLSZM_NAMES",
    "GLDM_NAMES",
    "NGTDM_NAMES",
    "FEATURE_NAMES",
]

COARSENESS_CAP = 1e6

SHAPE_NAMES = (
    "Elongation", "Flatness", "LeastAxisLength", "MajorAxisLength",
    "Maximum2DDiameterColumn", "Maximum2DDiameterRow", "Maximum2DDiameterSlice",
    "Maximum3DDiameter", "MeshVolume", "MinorAxisLength", "Sphericity",
    "SurfaceArea", "SurfaceVolumeRatio", "VoxelVolume",
)
FIRSTORDER_NAMES = (
    "Energy", "Entropy", "InterquartileRange", "Kurtosis", "Maximum", "Mean",
    "MeanAbsoluteDeviation", "Median", "Minimum", "Percentile10", "Percentile90",
    "Range", "RobustMeanAbsoluteDeviation", "RootMeanSquared", "Skewness",
    "StandardDeviation", "Uniformity", "Variance",
)
GLCM_NAMES = (
    "Autocorrelation", "ClusterProminence", "ClusterShade", "ClusterTendency",
    "Contrast", "Correlation", "DifferenceAverage", "DifferenceEntropy",
    "DifferenceVariance", "Id", "Idm", "Idmn", "Idn", "Imc1", "Imc2",
    "InverseVariance", "JointAverage", "JointEnergy", "JointEntropy",
    "MaximumProbability", "Mcc", "SumAverage", "SumEntropy", "SumSquares",
)
GLRLM_NAMES = (
    "GrayLevelNonUniformity", "GrayLevelNonUniformityNormalized",
    "GrayLevelVariance", "HighGrayLevelRunEmphasis", "LongRunEmphasis",
    "LongRunHighGrayLevelEmphasis", "LongRunLowGrayLevelEmphasis",
    "LowGrayLevelRunEmphasis", "RunEntropy", "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized", "RunPercentage", "RunVariance",
    "ShortRunEmphasis", "ShortRunHighGrayLevelEmphasis",
    "ShortRunLowGrayLevelEmphasis",
)
GLSZM_NAMES = (
    "GrayLevelNonUniformity", "GrayLevelNonUniformityNormalized",
    "GrayLevelVariance", "HighGrayLevelZoneEmphasis", "LargeAreaEmphasis",
    "LargeAreaHighGrayLevelEmphasis", "LargeAreaLowGrayLevelEmphasis",
    "LowGrayLevelZoneEmphasis", "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized", "SmallAreaEmphasis",
    "SmallAreaHighGrayLevelEmphasis", "SmallAreaLowGrayLevelEmphasis",
    "ZoneEntropy", "ZonePercentage", "ZoneVariance",
)
GLDM_NAMES = (
    "DependenceEntropy", "DependenceNonUniformity",
    "DependenceNonUniformityNormalized", "DependenceVariance",
    "GrayLevelNonUniformity", "GrayLevelVariance", "HighGrayLevelEmphasis",
    "LargeDependenceEmphasis", "LargeDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis", "LowGrayLevelEmphasis",
    "SmallDependenceEmphasis", "SmallDependenceHighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis",
)
NGTDM_NAMES = ("Busyness", "Coarseness", "Complexity", "Contrast", "Strength")

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{family}_{name}"
    for family, names in (
        ("shape", SHAPE_NAMES),
        ("firstorder", FIRSTORDER_NAMES),
        ("glcm", GLCM_NAMES),
        ("glrlm", GLRLM_NAMES),
        ("glszm", GLSZM_NAMES),
        ("gldm", GLDM_NAMES),
        ("ngtdm", NGTDM_NAMES),
    )
    for name in names
)
assert len(FEATURE_NAMES) == 107


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one ROI and contrast."""

    names: tuple[str, ...]
    values: np.ndarray
    provenance: str = "t1"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != len(values):
            raise ValidationError("feature name/value length mismatch")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def _safe_div(num, den):
    return num / den if den != 0 else 0.0


def _entropy(p: np.ndarray) -> float:
    pos = p[p > 0]
    return float(-(pos * np.log2(pos)).sum())


# ---------------------------------------------------------------- shape ----


def _pairwise_max(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    best = 0.0
    step = 1024
    for i in range(0, len(points), step):
        chunk = points[i : i + step]
        d2 = ((chunk[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def shape_features(m: Mask) -> dict[str, float]:
    """3D shape descriptors on the voxel-count volume / voxel-face surface.

    MeshVolume uses the same voxel-count convention as VoxelVolume, so the two
    coincide; diameters are distances between voxel centers.
    """
    if not m.data.any():
        raise ValidationError("empty mask")
    sp = np.array(m.spacing)
    n_vox = int(m.data.sum())
    vox_vol = float(np.prod(sp))

    # VoxelVolume = N * prod(spacing); MeshVolume identical by convention
    volume = n_vox * vox_vol

    # SurfaceArea: count mask faces exposed to background or the grid edge
    area = 0.0
    face_area = (sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1])
    for axis in range(3):
        pad = [(0, 0)] * 3
        pad[axis] = (1, 1)
        padded = np.pad(m.data, pad, mode="constant", constant_values=False)
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        exposed = padded[tuple(lo)] != padded[tuple(hi)]
        area += float(exposed.sum()) * float(face_area[axis])

    # Sphericity = (36*pi*V^2)^(1/3) / A
    sphericity = _safe_div((36.0 * np.pi * volume**2) ** (1.0 / 3.0), area)

    coords = np.argwhere(m.data).astype(np.float64) * sp[None, :]
    boundary = np.argwhere(mask_boundary(m.data)).astype(np.float64) * sp[None, :]

    # Maximum3DDiameter: largest pairwise distance between boundary voxel centers
    max3d = _pairwise_max(boundary)

    # Maximum2DDiameter per plane: largest in-plane distance among voxels
    # sharing the remaining index (slice: equal z; column: equal y; row: equal x)
    bidx = np.argwhere(mask_boundary(m.data))

    def plane_max(fixed_axis: int) -> float:
        keep = [a for a in range(3) if a != fixed_axis]
        best = 0.0
        for v in np.unique(bidx[:, fixed_axis]):
            pts = bidx[bidx[:, fixed_axis] == v][:, keep].astype(np.float64)
            pts *= sp[keep][None, :]
            best = max(best, _pairwise_max(pts))
        return best

    max2d_slice = plane_max(2)
    max2d_column = plane_max(1)
    max2d_row = plane_max(0)

    # axis lengths: 4*sqrt(eig) of the population covariance of voxel centers
    if n_vox > 1:
        centered = coords - coords.mean(axis=0)
        cov = centered.T @ centered / n_vox
        eig = np.sort(np.clip(np.linalg.eigvalsh(cov), 0.0, None))
    else:
        eig = np.zeros(3)
    least, minor, major = (float(np.sqrt(e)) * 4.0 for e in eig)
    elongation = _safe_div(np.sqrt(eig[1]), np.sqrt(eig[2])) if eig[2] > 0 else 0.0
    flatness = _safe_div(np.sqrt(eig[0]), np.sqrt(eig[2])) if eig[2] > 0 else 0.0

    return {
        "Elongation": float(elongation),
        "Flatness": float(flatness),
        "LeastAxisLength": least,
        "MajorAxisLength": major,
        "Maximum2DDiameterColumn": max2d_column,
        "Maximum2DDiameterRow": max2d_row,
        "Maximum2DDiameterSlice": max2d_slice,
        "Maximum3DDiameter": max3d,
        "MeshVolume": volume,
        "MinorAxisLength": minor,
        "Sphericity": float(sphericity),
        "SurfaceArea": area,
        "SurfaceVolumeRatio": _safe_div(area, volume),
        "VoxelVolume": volume,
    }


# ----------------------------------------------------------- first order ----


def firstorder_features(v: Volume, m: Mask, ng: int = DEFAULT_BIN_COUNT) -> dict[str, float]:
    """18 intensity statistics over foreground voxels.

    Entropy and Uniformity use the same ng-bin discretization as the texture
    families; everything else operates on raw intensities.
    """
    require_same_geometry(v, m)
    if not m.data.any():
        raise ValidationError("empty mask")
    x = v.data[m.data].astype(np.float64)
    n = x.size
    mean = float(x.mean())
    m2 = float(((x - mean) ** 2).mean())
    m3 = float(((x - mean) ** 3).mean())
    m4 = float(((x - mean) ** 4).mean())

    p10, p25, p75, p90 = (float(t) for t in percentile(x, [10, 25, 75, 90]))
    robust = x[(x >= p10) & (x <= p90)]
    rmad = float(np.abs(robust - robust.mean()).mean()) if robust.size else 0.0

    lv = discretize(v, m, ng).levels[m.data]
    hist = np.bincount(lv, minlength=ng + 1)[1:].astype(np.float64) / n

    return {
        # Energy = sum(x^2)
        "Energy": float((x**2).sum()),
        # Entropy = -sum(p log2 p) over the discretized histogram
        "Entropy": _entropy(hist),
        "InterquartileRange": p75 - p25,
        # Kurtosis = m4 / m2^2 (not excess)
        "Kurtosis": _safe_div(m4, m2**2),
        "Maximum": float(x.max()),
        "Mean": mean,
        # MAD = mean |x - mean|
        "MeanAbsoluteDeviation": float(np.abs(x - mean).mean()),
        "Median": float(np.median(x)),
        "Minimum": float(x.min()),
        "Percentile10": p10,
        "Percentile90": p90,
        "Range": float(x.max() - x.min()),
        # rMAD: MAD of the [P10, P90] subset
        "RobustMeanAbsoluteDeviation": rmad,
        "RootMeanSquared": float(np.sqrt((x**2).mean())),
        # Skewness = m3 / m2^(3/2)
        "Skewness": _safe_div(m3, m2**1.5),
        "StandardDeviation": float(np.sqrt(m2)),
        # Uniformity = sum(p^2)
        "Uniformity": float((hist**2).sum()),
        "Variance": m2,
    }


# ------------------------------------------------------------------ GLCM ----


def _glcm_single(p: np.ndarray, ng: int) -> dict[str, float]:
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, ng + 1, dtype=np.float64)[None, :]
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    ux = float((p * i).sum())
    uy = float((p * j).sum())
    sigx = float(np.sqrt((p * (i - ux) ** 2).sum()))
    sigy = float(np.sqrt((p * (j - uy) ** 2).sum()))

    k_sum = np.arange(2, 2 * ng + 1, dtype=np.float64)
    p_sum = np.zeros(2 * ng - 1)
    k_diff = np.arange(0, ng, dtype=np.float64)
    p_diff = np.zeros(ng)
    ii, jj = np.meshgrid(np.arange(1, ng + 1), np.arange(1, ng + 1), indexing="ij")
    np.add.at(p_sum, (ii + jj - 2).ravel(), p.ravel())
    np.add.at(p_diff, np.abs(ii - jj).ravel(), p.ravel())

    hx = _entropy(px)
    hy = _entropy(py)
    hxy = _entropy(p)
    pxpy = px[:, None] * py[None, :]
    pos = p > 0
    # HXY1 = -sum p(i,j) log2(px py); HXY2 = -sum px py log2(px py)
    hxy1 = float(-(p[pos] * np.log2(pxpy[pos])).sum())
    hxy2 = _entropy(pxpy)

    # DifferenceAverage = sum k p_(x-y)(k)
    da = float((k_diff * p_diff).sum())
    # Mcc = sqrt(second largest eigenvalue of Q),
    # Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k)) over present levels
    present = px > 0
    if present.sum() > 1:
        psub = p[np.ix_(present, present)]
        pxs = px[present]
        pys = py[present]
        q = (psub / pxs[:, None]) @ (psub / pys[None, :]).T
        ev = np.sort(np.real(np.linalg.eigvals(q)))
        mcc = float(np.sqrt(max(0.0, ev[-2])))
    else:
        mcc = 0.0

    contrast = float((p * (i - j) ** 2).sum())
    return {
        # Autocorrelation = sum p(i,j) i j
        "Autocorrelation": float((p * i * j).sum()),
        # ClusterProminence = sum p (i+j-ux-uy)^4
        "ClusterProminence": float((p * (i + j - ux - uy) ** 4).sum()),
        # ClusterShade = sum p (i+j-ux-uy)^3
        "ClusterShade": float((p * (i + j - ux - uy) ** 3).sum()),
        # ClusterTendency = sum p (i+j-ux-uy)^2
        "ClusterTendency": float((p * (i + j - ux - uy) ** 2).sum()),
        # Contrast = sum p (i-j)^2
        "Contrast": contrast,
        # Correlation = (sum p i j - ux uy) / (sigx sigy)
        "Correlation": _safe_div(float((p * i * j).sum()) - ux * uy, sigx * sigy),
        "DifferenceAverage": da,
        # DifferenceEntropy = -sum p_(x-y) log2 p_(x-y)
        "DifferenceEntropy": _entropy(p_diff),
        # DifferenceVariance = sum (k - DA)^2 p_(x-y)(k)
        "DifferenceVariance": float(((k_diff - da) ** 2 * p_diff).sum()),
        # Id = sum p / (1 + |i-j|)
        "Id": float((p / (1.0 + np.abs(i - j))).sum()),
        # Idm = sum p / (1 + (i-j)^2)
        "Idm": float((p / (1.0 + (i - j) ** 2)).sum()),
        # Idmn = sum p / (1 + ((i-j)/ng)^2)
        "Idmn": float((p / (1.0 + ((i - j) / ng) ** 2)).sum()),
        # Idn = sum p / (1 + |i-j|/ng)
        "Idn": float((p / (1.0 + np.abs(i - j) / ng)).sum()),
        # Imc1 = (HXY - HXY1) / max(HX, HY)
        "Imc1": _safe_div(hxy - hxy1, max(hx, hy)),
        # Imc2 = sqrt(1 - exp(-2 (HXY2 - HXY)))
        "Imc2": float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - hxy))))),
        # InverseVariance = sum_{k>=1} p_(x-y)(k) / k^2
        "InverseVariance": float((p_diff[1:] / k_diff[1:] ** 2).sum()) if ng > 1 else 0.0,
        # JointAverage = ux
        "JointAverage": ux,
        # JointEnergy = sum p^2
        "JointEnergy": float((p**2).sum()),
        # JointEntropy = -sum p log2 p
        "JointEntropy": hxy,
        "MaximumProbability": float(p.max()),
        "Mcc": mcc,
        # SumAverage = sum k p_(x+y)(k)
        "SumAverage": float((k_sum * p_sum).sum()),
        # SumEntropy = -sum p_(x+y) log2 p_(x+y)
        "SumEntropy": _entropy(p_sum),
        # SumSquares = sum p (i - ux)^2
        "SumSquares": float((p * (i - ux) ** 2).sum()),
    }


def glcm_features(d: DiscretizedRoi) -> dict[str, float]:
    """24 co-occurrence features, averaged over the 13 symmetric offsets."""
    mats = cooccurrence_matrices(d)
    if not mats:
        return {name: 0.0 for name in GLCM_NAMES}
    acc = {name: 0.0 for name in GLCM_NAMES}
    for p in mats:
        single = _glcm_single(p, d.ng)
        for name in GLCM_NAMES:
            acc[name] += single[name]
    return {name: acc[name] / len(mats) for name in GLCM_NAMES}


# ----------------------------------------------------------------- GLRLM ----


def _rlm_single(mat: np.ndarray, n_vox: int) -> dict[str, float]:
    nr = float(mat.sum())
    if nr == 0:
        return {name: 0.0 for name in GLRLM_NAMES}
    i = np.arange(1, mat.shape[0] + 1, dtype=np.float64)[:, None]
    j = np.arange(1, mat.shape[1] + 1, dtype=np.float64)[None, :]
    p = mat / nr
    ri = mat.sum(axis=1)
    rj = mat.sum(axis=0)
    mu_i = float((p * i).sum())
    mu_j = float((p * j).sum())
    return {
        # GLN = sum_i (sum_j R)^2 / Nr
        "GrayLevelNonUniformity": float((ri**2).sum() / nr),
        "GrayLevelNonUniformityNormalized": float((ri**2).sum() / nr**2),
        # GLV = sum p (i - mu_i)^2
        "GrayLevelVariance": float((p * (i - mu_i) ** 2).sum()),
        # HGLRE = sum R i^2 / Nr
        "HighGrayLevelRunEmphasis": float((mat * i**2).sum() / nr),
        # LRE = sum R j^2 / Nr
        "LongRunEmphasis": float((mat * j**2).sum() / nr),
        "LongRunHighGrayLevelEmphasis": float((mat * i**2 * j**2).sum() / nr),
        "LongRunLowGrayLevelEmphasis": float((mat * j**2 / i**2).sum() / nr),
        "LowGrayLevelRunEmphasis": float((mat / i**2).sum() / nr),
        "RunEntropy": _entropy(p),
        # RLN = sum_j (sum_i R)^2 / Nr
        "RunLengthNonUniformity": float((rj**2).sum() / nr),
        "RunLengthNonUniformityNormalized": float((rj**2).sum() / nr**2),
        # RP = Nr / Np
        "RunPercentage": nr / n_vox,
        "RunVariance": float((p * (j - mu_j) ** 2).sum()),
        # SRE = sum R / j^2 / Nr
        "ShortRunEmphasis": float((mat / j**2).sum() / nr),
        "ShortRunHighGrayLevelEmphasis": float((mat * i**2 / j**2).sum() / nr),
        "ShortRunLowGrayLevelEmphasis": float((mat / (i**2 * j**2)).sum() / nr),
    }


def glrlm_features(d: DiscretizedRoi) -> dict[str, float]:
    """16 run-length features, averaged over the 13 directions."""
    mats = run_length_matrices(d)
    n_vox = d.foreground_count
    acc = {name: 0.0 for name in GLRLM_NAMES}
    for mat in mats:
        single = _rlm_single(mat, n_vox)
        for name in GLRLM_NAMES:
            acc[name] += single[name]
    return {name: acc[name] / len(mats) for name in GLRLM_NAMES}


# ----------------------------------------------------------------- GLSZM ----


def glszm_features(d: DiscretizedRoi) -> dict[str, float]:
    """16 size-zone features over 26-connected equal-level zones."""
    mat = size_zone_matrix(d)
    nz = float(mat.sum())
    n_vox = d.foreground_count
    if nz == 0:
        return {name: 0.0 for name in GLSZM_NAMES}
    i = np.arange(1, mat.shape[0] + 1, dtype=np.float64)[:, None]
    s = np.arange(1, mat.shape[1] + 1, dtype=np.float64)[None, :]
    p = mat / nz
    zi = mat.sum(axis=1)
    zs = mat.sum(axis=0)
    mu_i = float((p * i).sum())
    mu_s = float((p * s).sum())
    return {
        "GrayLevelNonUniformity": float((zi**2).sum() / nz),
        "GrayLevelNonUniformityNormalized": float((zi**2).sum() / nz**2),
        "GrayLevelVariance": float((p * (i - mu_i) ** 2).sum()),
        "HighGrayLevelZoneEmphasis": float((mat * i**2).sum() / nz),
        # LAE = sum S s^2 / Nz
        "LargeAreaEmphasis": float((mat * s**2).sum() / nz),
        "LargeAreaHighGrayLevelEmphasis": float((mat * i**2 * s**2).sum() / nz),
        "LargeAreaLowGrayLevelEmphasis": float((mat * s**2 / i**2).sum() / nz),
        "LowGrayLevelZoneEmphasis": float((mat / i**2).sum() / nz),
        "SizeZoneNonUniformity": float((zs**2).sum() / nz),
        "SizeZoneNonUniformityNormalized": float((zs**2).sum() / nz**2),
        # SAE = sum S / s^2 / Nz
        "SmallAreaEmphasis": float((mat / s**2).sum() / nz),
        "SmallAreaHighGrayLevelEmphasis": float((mat * i**2 / s**2).sum() / nz),
        "SmallAreaLowGrayLevelEmphasis": float((mat / (i**2 * s**2)).sum() / nz),
        "ZoneEntropy": _entropy(p),
        # ZP = Nz / Np
        "ZonePercentage": nz / n_vox,
        "ZoneVariance": float((p * (s - mu_s) ** 2).sum()),
    }


# ------------------------------------------------------------------ GLDM ----


def gldm_features(d: DiscretizedRoi) -> dict[str, float]:
    """14 dependence features; dependence variable j = neighbor count + 1."""
    mat = dependence_matrix(d)
    nz = float(mat.sum())
    i = np.arange(1, mat.shape[0] + 1, dtype=np.float64)[:, None]
    j = np.arange(1, mat.shape[1] + 1, dtype=np.float64)[None, :]
    p = mat / nz
    di = mat.sum(axis=1)
    dj = mat.sum(axis=0)
    mu_i = float((p * i).sum())
    mu_j = float((p * j).sum())
    return {
        "DependenceEntropy": _entropy(p),
        # DN = sum_j (sum_i D)^2 / Nz
        "DependenceNonUniformity": float((dj**2).sum() / nz),
        "DependenceNonUniformityNormalized": float((dj**2).sum() / nz**2),
        "DependenceVariance": float((p * (j - mu_j) ** 2).sum()),
        "GrayLevelNonUniformity": float((di**2).sum() / nz),
        "GrayLevelVariance": float((p * (i - mu_i) ** 2).sum()),
        "HighGrayLevelEmphasis": float((mat * i**2).sum() / nz),
        # LDE = sum D j^2 / Nz
        "LargeDependenceEmphasis": float((mat * j**2).sum() / nz),
        "LargeDependenceHighGrayLevelEmphasis": float((mat * i**2 * j**2).sum() / nz),
        "LargeDependenceLowGrayLevelEmphasis": float((mat * j**2 / i**2).sum() / nz),
        "LowGrayLevelEmphasis": float((mat / i**2).sum() / nz),
        # SDE = sum D / j^2 / Nz
        "SmallDependenceEmphasis": float((mat / j**2).sum() / nz),
        "SmallDependenceHighGrayLevelEmphasis": float((mat * i**2 / j**2).sum() / nz),
        "SmallDependenceLowGrayLevelEmphasis": float((mat / (i**2 * j**2)).sum() / nz),
    }


# ----------------------------------------------------------------- NGTDM ----


def ngtdm_features(d: DiscretizedRoi) -> dict[str, float]:
    """5 neighborhood gray-tone difference features."""
    n_i, s_i, nvp = gray_tone_difference_table(d)
    if nvp == 0:
        return {
            "Busyness": 0.0,
            "Coarseness": COARSENESS_CAP,
            "Complexity": 0.0,
            "Contrast": 0.0,
            "Strength": 0.0,
        }
    p_i = n_i / nvp
    levels = np.arange(1, len(n_i) + 1, dtype=np.float64)
    present = p_i > 0
    ngp = int(present.sum())
    il = levels[present]
    pl = p_i[present]
    sl = s_i[present]

    # Coarseness = 1 / sum(p_i s_i), capped
    ps = float((pl * sl).sum())
    coarseness = min(COARSENESS_CAP, _safe_div(1.0, ps) if ps != 0 else COARSENESS_CAP)

    # Contrast = [1/(Ngp (Ngp-1)) sum_ij p_i p_j (i-j)^2] [1/Nvp sum s_i]
    if ngp > 1:
        diff2 = (il[:, None] - il[None, :]) ** 2
        contrast = float((pl[:, None] * pl[None, :] * diff2).sum()) / (ngp * (ngp - 1)) * (
            float(sl.sum()) / nvp
        )
    else:
        contrast = 0.0

    # Busyness = sum(p_i s_i) / sum_ij |i p_i - j p_j|
    denom = float(np.abs(il[:, None] * pl[:, None] - il[None, :] * pl[None, :]).sum())
    busyness = _safe_div(ps, denom)

    # Complexity = 1/Nvp sum_ij |i - j| (p_i s_i + p_j s_j) / (p_i + p_j)
    num = np.abs(il[:, None] - il[None, :]) * (
        (pl[:, None] * sl[:, None] + pl[None, :] * sl[None, :])
        / (pl[:, None] + pl[None, :])
    )
    complexity = float(num.sum()) / nvp

    # Strength = sum_ij (p_i + p_j)(i - j)^2 / sum s_i
    s_total = float(sl.sum())
    strength = (
        _safe_div(float(((pl[:, None] + pl[None, :]) * (il[:, None] - il[None, :]) ** 2).sum()), s_total)
        if ngp > 1
        else 0.0
    )

    return {
        "Busyness": busyness,
        "Coarseness": coarseness,
        "Complexity": complexity,
        "Contrast": contrast,
        "Strength": strength,
    }


# ------------------------------------------------------------- extraction ----


def extract_feature_vector(
    v: Volume, m: Mask, ng: int = DEFAULT_BIN_COUNT, contrast: str = "t1"
) -> FeatureVector:
    """Concatenate all 107 features in canonical order; values are always finite."""
    require_same_geometry(v, m)
    d = discretize(v, m, ng)
    blocks = (
        shape_features(m),
        firstorder_features(v, m, ng),
        glcm_features(d),
        glrlm_features(d),
        glszm_features(d),
        gldm_features(d),
        ngtdm_features(d),
    )
    names_blocks = (
        SHAPE_NAMES, FIRSTORDER_NAMES, GLCM_NAMES, GLRLM_NAMES,
        GLSZM_NAMES, GLDM_NAMES, NGTDM_NAMES,
    )
    values = np.array(
        [block[name] for block, names in zip(blocks, names_blocks) for name in names],
        dtype=np.float64,
    )
    if not np.all(np.isfinite(values)):
        bad = [FEATURE_NAMES[k] for k in np.nonzero(~np.isfinite(values))[0]]
        raise ValidationError(f"non-finite features: {bad}")
    return FeatureVector(names=FEATURE_NAMES, values=values, provenance=contrast)
