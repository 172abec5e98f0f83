"""Deterministic synthetic multi-center study generator.

Each case gets an ellipsoidal pancreas-like mask, class-dependent texture
(Gaussian random field correlation length), hyperintense blobs whose count
grows with risk class, a smooth multiplicative bias field, and per-center
affine intensity distortion plus noise. The class signal is carried by
texture, blobs, and organ volume, never by a global mean offset, so intensity
shortcuts do not survive standardization. Per-case RNG streams derive from
(seed, case index); generation order or parallelism never changes output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .clinical import mask_diagonal_mm, mask_volume_ml
from .errors import ValidationError
from .nifti import save_nifti
from .util import case_rng
from .volume import Mask, Volume

__all__ = [
    "CenterSpec",
    "ClassSpec",
    "PhantomSpec",
    "default_phantom_spec",
    "generate_study",
    "synthetic_dl_probabilities",
    "CLASS_NAMES",
]

CLASS_NAMES = ("healthy", "low", "high")


@dataclass(frozen=True)
class CenterSpec:
    """Per-center affine intensity distortion and acquisition noise."""

    name: str
    intensity_scale: float = 1.0
    intensity_shift: float = 0.0
    noise_sigma: float = 2.0

    def __post_init__(self):
        if self.intensity_scale <= 0 or self.noise_sigma < 0:
            raise ValidationError(f"invalid center spec {self}")


@dataclass(frozen=True)
class ClassSpec:
    """Texture, lesion, and volume parameters of one risk class."""

    name: str
    texture_corr_mm: float
    blob_count: tuple[int, int]          # inclusive range
    blob_sigma_mm: tuple[float, float]
    blob_amplitude: float                # in units of texture std
    volume_ml_mean: float
    volume_ml_sd: float

    def __post_init__(self):
        if self.texture_corr_mm <= 0 or self.volume_ml_mean <= 0 or self.volume_ml_sd <= 0:
            raise ValidationError(f"invalid class spec {self}")
        if self.blob_count[0] < 0 or self.blob_count[1] < self.blob_count[0]:
            raise ValidationError(f"invalid blob count range in {self}")


@dataclass(frozen=True)
class PhantomSpec:
    n_cases: tuple[int, int, int]
    centers: tuple[CenterSpec, ...]
    classes: tuple[ClassSpec, ClassSpec, ClassSpec]
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing_mm: float = 1.0
    bias_field_strength: float = 0.15
    t1_base: tuple[float, float] = (100.0, 15.0)   # inside-mask mean, texture std
    t2_base: tuple[float, float] = (80.0, 15.0)
    background: tuple[float, float] = (25.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if any(n <= 0 for n in self.n_cases):
            raise ValidationError("n_cases must be positive per class")
        if not self.centers:
            raise ValidationError("need at least one center")
        if self.spacing_mm <= 0:
            raise ValidationError("spacing must be positive")

    def total_cases(self) -> int:
        return sum(self.n_cases)


def default_phantom_spec(n_per_class=(50, 50, 50), seed: int = 0, dims=(64, 64, 64)) -> PhantomSpec:
    """Calibrated defaults: three centers, separable but not trivial classes."""
    centers = (
        CenterSpec(name="center_a", intensity_scale=1.0, intensity_shift=0.0, noise_sigma=2.0),
        CenterSpec(name="center_b", intensity_scale=1.35, intensity_shift=12.0, noise_sigma=2.5),
        CenterSpec(name="center_c", intensity_scale=0.8, intensity_shift=-5.0, noise_sigma=3.0),
    )
    classes = (
        ClassSpec("healthy", texture_corr_mm=1.6, blob_count=(0, 0),
                  blob_sigma_mm=(2.0, 3.5), blob_amplitude=2.5,
                  volume_ml_mean=18.0, volume_ml_sd=3.0),
        ClassSpec("low", texture_corr_mm=3.0, blob_count=(1, 2),
                  blob_sigma_mm=(2.0, 3.5), blob_amplitude=2.5,
                  volume_ml_mean=25.0, volume_ml_sd=4.0),
        ClassSpec("high", texture_corr_mm=4.5, blob_count=(4, 6),
                  blob_sigma_mm=(2.0, 3.5), blob_amplitude=2.5,
                  volume_ml_mean=33.0, volume_ml_sd=5.0),
    )
    return PhantomSpec(n_cases=tuple(n_per_class), centers=centers, classes=classes,
                       dims=tuple(dims), seed=seed)


def _grf(rng, dims, corr_vox) -> np.ndarray:
    """Unit-variance Gaussian random field via spectral (Gaussian) filtering."""
    white = rng.standard_normal(dims)
    field = gaussian_filter(white, sigma=corr_vox, mode="wrap")
    sd = field.std()
    return field / sd if sd > 0 else field


def _ellipsoid_mask(rng, dims, spacing, target_ml):
    """Axis-aligned ellipsoid with the requested volume, jittered off center."""
    vol_mm3 = target_ml * 1000.0
    base = (vol_mm3 * 3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)
    ratios = rng.uniform(0.7, 1.3, size=3)
    ratios /= ratios.prod() ** (1.0 / 3.0)
    semi = base * ratios  # mm
    center = np.array(dims) / 2.0 + rng.uniform(-3.0, 3.0, size=3)
    grids = np.meshgrid(*(np.arange(n) for n in dims), indexing="ij")
    acc = np.zeros(dims)
    for g, c, a in zip(grids, center, semi / spacing):
        acc += ((g - c) / a) ** 2
    mask = acc <= 1.0
    if not mask.any():
        raise ValidationError("phantom mask came out empty; volume too small for grid")
    return mask


def _add_blobs(rng, img, mask, centers_vox, sigmas_vox, amplitude):
    dims = img.shape
    for c, s in zip(centers_vox, sigmas_vox):
        r = int(np.ceil(3 * s))
        sl = tuple(slice(max(0, int(c[a]) - r), min(dims[a], int(c[a]) + r + 1)) for a in range(3))
        grids = np.meshgrid(*(np.arange(s_.start, s_.stop) for s_ in sl), indexing="ij")
        d2 = sum((g - cc) ** 2 for g, cc in zip(grids, c))
        img[sl] += amplitude * np.exp(-d2 / (2.0 * s * s))
    return img


def _case_assignments(spec: PhantomSpec):
    """Deterministic (label, center) per case index, classes interleaved."""
    labels = []
    for lab, n in enumerate(spec.n_cases):
        labels.extend([lab] * n)
    out = []
    per_class_counter = [0, 0, 0]
    for lab in labels:
        center = spec.centers[per_class_counter[lab] % len(spec.centers)]
        per_class_counter[lab] += 1
        out.append((lab, center))
    return out


def _generate_case(spec: PhantomSpec, index: int, label: int, center: CenterSpec):
    rng = case_rng(spec.seed, index)
    cls = spec.classes[label]
    sp = spec.spacing_mm
    dims = spec.dims

    target_ml = float(np.clip(rng.normal(cls.volume_ml_mean, cls.volume_ml_sd),
                              cls.volume_ml_mean * 0.4, None))
    mask = _ellipsoid_mask(rng, dims, sp, target_ml)

    n_blobs = int(rng.integers(cls.blob_count[0], cls.blob_count[1] + 1))
    fg = np.argwhere(mask)
    blob_centers = fg[rng.integers(0, len(fg), size=n_blobs)] if n_blobs else []
    blob_sigmas = rng.uniform(cls.blob_sigma_mm[0], cls.blob_sigma_mm[1], size=n_blobs) / sp

    contrasts = {}
    for tag, (base_mean, tex_sd) in (("t1", spec.t1_base), ("t2", spec.t2_base)):
        corr_vox = cls.texture_corr_mm / sp
        tex = _grf(rng, dims, corr_vox)
        bg = spec.background[0] + spec.background[1] * _grf(rng, dims, 3.0 / sp)
        img = bg.copy()
        img[mask] = base_mean + tex_sd * tex[mask]
        if n_blobs:
            _add_blobs(rng, img, mask, blob_centers, blob_sigmas, cls.blob_amplitude * tex_sd)
        bias = _grf(rng, dims, 25.0 / sp)
        bias = 1.0 + spec.bias_field_strength * bias / np.abs(bias).max()
        img *= bias
        img = center.intensity_scale * img + center.intensity_shift
        img += rng.normal(0.0, center.noise_sigma, size=dims)
        np.clip(img, 0.0, None, out=img)
        contrasts[tag] = Volume(data=img, spacing=(sp, sp, sp))

    mask_img = Mask(data=mask, spacing=(sp, sp, sp))
    vol_ml = mask_volume_ml(mask_img)
    diag_mm = mask_diagonal_mm(mask_img)
    clinical = {
        "diabetes": float(rng.random() < 0.2),
        "volume_ml": vol_ml,
        "diagonal_mm": diag_mm,
        "vol_over_diag": vol_ml / diag_mm,
        "age": float(np.clip(rng.normal(62.0, 10.0), 30.0, 90.0)),
        "gender": float(rng.random() < 0.5),
        "bmi": float(np.clip(rng.normal(26.0, 4.0), 16.0, 45.0)),
        "chronic_pancreatitis": float(rng.random() < 0.1),
    }
    return contrasts, mask_img, clinical


def generate_study(spec: PhantomSpec, out_dir) -> list[str]:
    """Write the study tree; returns the case ids in order.

    Layout: ``<out>/<case_id>/{t1.nii.gz,t2.nii.gz,mask.nii.gz}`` plus
    ``clinical.csv``, ``labels.csv``, and ``manifest.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    assignments = _case_assignments(spec)
    case_ids = []
    clinical_rows = []
    label_rows = []
    for index, (label, center) in enumerate(assignments):
        case_id = f"case_{index:04d}"
        case_ids.append(case_id)
        contrasts, mask_img, clinical = _generate_case(spec, index, label, center)
        case_dir = out / case_id
        case_dir.mkdir(exist_ok=True)
        save_nifti(contrasts["t1"], case_dir / "t1.nii.gz")
        save_nifti(contrasts["t2"], case_dir / "t2.nii.gz")
        save_nifti(mask_img, case_dir / "mask.nii.gz")
        clinical_rows.append({"case_id": case_id, **clinical, "label": label})
        label_rows.append({"case_id": case_id, "center": center.name, "label": label})

    with open(out / "labels.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["case_id", "center", "label"])
        w.writeheader()
        w.writerows(label_rows)
    with open(out / "clinical.csv", "w", newline="") as fh:
        fields = ["case_id", "diabetes", "volume_ml", "diagonal_mm", "vol_over_diag",
                  "age", "gender", "bmi", "chronic_pancreatitis", "label"]
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in clinical_rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    manifest = {"seed": spec.seed, "spec": asdict(spec)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return case_ids


def synthetic_dl_probabilities(labels, correct_rate: float = 1.0,
                               confidence: float = 0.9, seed: int = 0) -> np.ndarray:
    """Stand-in DL classifier output: `confidence` on the chosen class.

    With probability correct_rate the chosen class is the true one, otherwise
    a uniformly random wrong class.
    """
    y = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    k = int(y.max()) + 1
    rest = (1.0 - confidence) / (k - 1)
    out = np.full((len(y), k), rest)
    for i, lab in enumerate(y):
        chosen = int(lab)
        if rng.random() > correct_rate:
            others = [c for c in range(k) if c != lab]
            chosen = int(others[rng.integers(0, len(others))])
        out[i, chosen] = confidence
    return out
