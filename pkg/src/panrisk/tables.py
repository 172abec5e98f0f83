"""CSV wire formats: the per-case feature table, clinical covariates, and
externally supplied deep-learning probability vectors.

All files are UTF-8 with '.' decimals; float cells use repr() so a rewrite of
the same table is byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clinical import CLINICAL_FEATURE_NAMES, ClinicalRecord
from .errors import FormatError, ValidationError
from .radiomics.features import FEATURE_NAMES

__all__ = [
    "FeatureTable",
    "feature_table_columns",
    "read_clinical_csv",
    "write_clinical_csv",
    "read_dl_probabilities",
    "write_probabilities_csv",
]

_PROB_COLUMNS = ("p_healthy", "p_low", "p_high")


def feature_table_columns() -> tuple[str, ...]:
    """Canonical feature column order: t1 radiomics, t2 radiomics, clinical."""
    return tuple(
        [f"t1_{n}" for n in FEATURE_NAMES]
        + [f"t2_{n}" for n in FEATURE_NAMES]
        + list(CLINICAL_FEATURE_NAMES)
    )


@dataclass
class FeatureTable:
    """Per-case named features with identity columns (case_id, center, label)."""

    case_ids: list[str]
    centers: list[str]
    labels: np.ndarray
    feature_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        n = len(self.case_ids)
        if not (len(self.centers) == n == len(self.labels) == self.values.shape[0]):
            raise ValidationError("feature table row counts differ")
        if self.values.shape[1] != len(self.feature_names):
            raise ValidationError("feature table column counts differ")
        if len(set(self.case_ids)) != n:
            raise ValidationError("duplicate case ids in feature table")

    @property
    def n(self) -> int:
        return len(self.case_ids)

    def column_indices(self, names) -> np.ndarray:
        index = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise ValidationError(f"unknown feature columns: {missing}")
        return np.array([index[n] for n in names], dtype=np.int64)

    def select_rows(self, case_ids) -> "FeatureTable":
        pos = {c: i for i, c in enumerate(self.case_ids)}
        missing = [c for c in case_ids if c not in pos]
        if missing:
            raise ValidationError(f"cases missing from feature table: {missing}")
        idx = [pos[c] for c in case_ids]
        return FeatureTable(
            case_ids=[self.case_ids[i] for i in idx],
            centers=[self.centers[i] for i in idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
            values=self.values[idx],
        )

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case_id", "center", "label", *self.feature_names])
            for i in range(self.n):
                w.writerow(
                    [self.case_ids[i], self.centers[i], int(self.labels[i])]
                    + [repr(float(v)) for v in self.values[i]]
                )

    @classmethod
    def load(cls, path) -> "FeatureTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty feature table") from None
            if header[:3] != ["case_id", "center", "label"]:
                raise FormatError(f"{path}: feature table must start with case_id,center,label")
            names = tuple(header[3:])
            case_ids, centers, labels, rows = [], [], [], []
            for row in reader:
                if len(row) != len(header):
                    raise FormatError(f"{path}: row width mismatch for {row[:1]}")
                case_ids.append(row[0])
                centers.append(row[1])
                labels.append(int(row[2]))
                rows.append([float(v) for v in row[3:]])
        return cls(
            case_ids=case_ids,
            centers=centers,
            labels=np.array(labels),
            feature_names=names,
            values=np.array(rows, dtype=np.float64),
        )


_CLINICAL_FIELDS = ("case_id", *CLINICAL_FEATURE_NAMES, "label")


def write_clinical_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CLINICAL_FIELDS)
        for r in records:
            w.writerow(
                [r.case_id]
                + [repr(float(getattr(r, k))) for k in CLINICAL_FEATURE_NAMES]
                + [int(r.label)]
            )


def read_clinical_csv(path, impute: bool = False) -> list[ClinicalRecord]:
    """Parse clinical covariates; empty cells are rejected unless impute=True,
    in which case column means over the present values fill the gaps."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != _CLINICAL_FIELDS:
            raise FormatError(
                f"{path}: clinical CSV header must be {','.join(_CLINICAL_FIELDS)}"
            )
        raw = list(reader)
    n_feat = len(CLINICAL_FEATURE_NAMES)
    values = np.full((len(raw), n_feat), np.nan)
    case_ids, labels = [], []
    for i, row in enumerate(raw):
        if len(row) != len(_CLINICAL_FIELDS):
            raise FormatError(f"{path}: wrong column count in row {i + 2}")
        case_ids.append(row[0])
        for j in range(n_feat):
            cell = row[1 + j].strip()
            if cell:
                values[i, j] = float(cell)
            elif not impute:
                raise FormatError(
                    f"{path}: missing value for {CLINICAL_FEATURE_NAMES[j]} "
                    f"in case {row[0]} (enable imputation to fill with column means)"
                )
        labels.append(int(row[-1]))
    if impute:
        for j in range(n_feat):
            col = values[:, j]
            missing = np.isnan(col)
            if missing.all():
                raise FormatError(f"{path}: column {CLINICAL_FEATURE_NAMES[j]} entirely missing")
            col[missing] = col[~missing].mean()
    return [
        ClinicalRecord(
            case_id=case_ids[i],
            label=labels[i],
            **{k: float(values[i, j]) for j, k in enumerate(CLINICAL_FEATURE_NAMES)},
        )
        for i in range(len(raw))
    ]


def read_dl_probabilities(path) -> dict[str, np.ndarray]:
    """Parse the external DL probability CSV; each row must sum to 1 +- 1e-6."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ("case_id", *_PROB_COLUMNS)
        if header is None or tuple(header) != expected:
            raise FormatError(f"{path}: header must be {','.join(expected)}")
        out: dict[str, np.ndarray] = {}
        for row in reader:
            if len(row) != 4:
                raise FormatError(f"{path}: wrong column count in row {row[:1]}")
            case_id = row[0]
            p = np.array([float(v) for v in row[1:]], dtype=np.float64)
            if abs(float(p.sum()) - 1.0) > 1e-6 or np.any(p < 0) or np.any(p > 1):
                raise FormatError(
                    f"{path}: probabilities for case {case_id} do not form a distribution"
                )
            if case_id in out:
                raise FormatError(f"{path}: duplicate case id {case_id}")
            out[case_id] = p
    return out


def write_probabilities_csv(case_ids, probs, path) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", *_PROB_COLUMNS])
        for cid, p in zip(case_ids, probs):
            w.writerow([cid] + [repr(float(v)) for v in p])
