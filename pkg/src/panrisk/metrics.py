"""Classification metrics and segmentation QC metrics.

AUC is one-vs-rest macro with rank-based tie averaging; macro precision and
recall run over classes present in the labels, with precision 0 for classes
that receive no predicted positives. HD95 uses the project-wide interpolated
percentile over boundary-to-boundary distances in millimeters.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .util import mask_boundary, percentile
from .volume import Mask, require_same_geometry

__all__ = [
    "accuracy",
    "macro_precision_recall",
    "auc_ovr_macro",
    "dice",
    "hd95",
    "evaluation_report",
    "roc_points",
]


def accuracy(preds, labels) -> float:
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.size != y.size or p.size == 0:
        raise ValidationError("preds and labels must be nonempty and equal length")
    return float((p == y).mean())


def macro_precision_recall(preds, labels) -> tuple[float, float]:
    """Macro-averaged precision and recall over classes present in labels."""
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.size != y.size or p.size == 0:
        raise ValidationError("preds and labels must be nonempty and equal length")
    precisions, recalls = [], []
    for c in np.unique(y):
        tp = float(((p == c) & (y == c)).sum())
        fp = float(((p == c) & (y != c)).sum())
        fn = float(((p != c) & (y == c)).sum())
        precisions.append(tp / (tp + fp) if tp + fp > 0 else 0.0)
        recalls.append(tp / (tp + fn))
    return float(np.mean(precisions)), float(np.mean(recalls))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_ovr_macro(probs, labels) -> float:
    """One-vs-rest macro AUC via the rank statistic with tie averaging."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    if p.ndim != 2 or len(p) != len(y):
        raise ValidationError("probs must be (n, k) with n labels")
    if len(np.unique(y)) < 2:
        raise ValidationError("AUC needs at least 2 distinct labels")
    aucs = []
    for ci in range(p.shape[1]):
        pos = y == ci
        n_pos = int(pos.sum())
        n_neg = int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = _average_ranks(p[:, ci])
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        aucs.append(auc)
    return float(np.mean(aucs))


def dice(a: Mask, b: Mask) -> float:
    """2|A n B| / (|A| + |B|); two empty masks count as identical."""
    require_same_geometry(a, b)
    inter = float((a.data & b.data).sum())
    total = float(a.data.sum()) + float(b.data.sum())
    return 2.0 * inter / total if total > 0 else 1.0


def _boundary_points_mm(m: Mask) -> np.ndarray:
    idx = np.argwhere(mask_boundary(m.data)).astype(np.float64)
    return idx * np.array(m.spacing)[None, :]


def hd95(a: Mask, b: Mask) -> float:
    """Max of the two directed 95th-percentile boundary distances, in mm."""
    require_same_geometry(a, b)
    if not a.data.any() or not b.data.any():
        raise ValidationError("hd95 requires two nonempty masks")
    pa = _boundary_points_mm(a)
    pb = _boundary_points_mm(b)
    d_ab, _ = cKDTree(pb).query(pa, k=1)
    d_ba, _ = cKDTree(pa).query(pb, k=1)
    return float(max(percentile(d_ab, 95.0), percentile(d_ba, 95.0)))


def evaluation_report(probs, labels) -> dict:
    """Headline metrics plus per-class precision/recall counts."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    preds = np.argmax(p, axis=1)
    pr, rc = macro_precision_recall(preds, y)
    per_class = {}
    for c in sorted(np.unique(y).tolist()):
        tp = int(((preds == c) & (y == c)).sum())
        fp = int(((preds == c) & (y != c)).sum())
        fn = int(((preds != c) & (y == c)).sum())
        per_class[str(int(c))] = {
            "precision": tp / (tp + fp) if tp + fp else 0.0,
            "recall": tp / (tp + fn) if tp + fn else 0.0,
            "support": int((y == c).sum()),
        }
    return {
        "acc": accuracy(preds, y),
        "auc": auc_ovr_macro(p, y),
        "pr": pr,
        "rc": rc,
        "per_class": per_class,
        "n": int(len(y)),
    }


def roc_points(probs, labels) -> list[tuple[int, float, float, float]]:
    """Per-class ROC points (class, threshold, fpr, tpr) for external plotting."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    rows = []
    for ci in range(p.shape[1]):
        pos = y == ci
        n_pos = int(pos.sum())
        n_neg = int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        order = np.argsort(-p[:, ci], kind="stable")
        tp = fp = 0
        rows.append((ci, float("inf"), 0.0, 0.0))
        last_score = None
        for i in order:
            if last_score is not None and p[i, ci] != last_score:
                rows.append((ci, last_score, fp / n_neg, tp / n_pos))
            if pos[i]:
                tp += 1
            else:
                fp += 1
            last_score = float(p[i, ci])
        rows.append((ci, last_score, fp / n_neg, tp / n_pos))
    return rows
