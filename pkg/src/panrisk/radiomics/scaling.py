"""Log transform and unit-variance scaling of feature columns.

Raw radiomics values span many orders of magnitude and can be negative (for
example Skewness), so the log step is the signed transform
sign(x) * ln(1 + |x|), which agrees with ln(1 + x) on the non-negative half.
Moments use the population convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError

__all__ = ["signed_log1p", "FeatureScaler", "fit_scaler", "apply_scaler"]


def signed_log1p(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite feature values")
    return np.sign(x) * np.log1p(np.abs(x))


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature mean and std of the log-transformed training values."""

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).copy()
        std = np.asarray(self.std, dtype=np.float64).copy()
        if len(self.names) != mean.size or mean.size != std.size:
            raise ValidationError("scaler field lengths differ")
        if np.any(std < 0):
            raise ValidationError("negative std in scaler")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def constant(self) -> np.ndarray:
        """Columns that were constant in training (std == 0); they scale to 0."""
        return self.std == 0

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(names=tuple(d["names"]), mean=np.array(d["mean"]), std=np.array(d["std"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureScaler":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_scaler(values: np.ndarray, names) -> FeatureScaler:
    """Fit column means and population stds on log-transformed training rows."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValidationError("expected a 2D (cases x features) array")
    if v.shape[1] != len(names):
        raise ValidationError("column count does not match names")
    if v.shape[0] < 1:
        raise ValidationError("need at least one training row")
    t = signed_log1p(v)
    return FeatureScaler(names=tuple(names), mean=t.mean(axis=0), std=t.std(axis=0))


def apply_scaler(scaler: FeatureScaler, values: np.ndarray) -> np.ndarray:
    """z = (signed_log1p(x) - mean) / std per column; constant columns map to 0."""
    v = np.asarray(values, dtype=np.float64)
    single = v.ndim == 1
    if single:
        v = v[None, :]
    if v.shape[1] != len(scaler.names):
        raise ValidationError("column count does not match the fitted scaler")
    t = signed_log1p(v)
    std = np.where(scaler.constant, 1.0, scaler.std)
    z = (t - scaler.mean[None, :]) / std[None, :]
    z[:, scaler.constant] = 0.0
    return z[0] if single else z
