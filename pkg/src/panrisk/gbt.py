"""From-scratch multiclass gradient-boosted trees with softmax objective.

Per boosting round one regression tree per class is fit to the multiclass
log-loss gradient and diagonal hessian; leaf weights are damped Newton steps
-lr * G / (H + lambda). Split finding is exact greedy over sorted unique
feature values, with deterministic tie-breaks (lowest feature index, then
lowest threshold), so identical inputs always produce identical models.
No row or column subsampling is used.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "GbtParams",
    "GbtModel",
    "CvSplit",
    "gbt_fit",
    "gbt_predict_proba",
    "stratified_kfold",
    "grid_search",
    "cross_val_probabilities",
    "DEFAULT_GRID",
]

DEFAULT_GRID = {"n_estimators": [60, 100, 140, 180], "max_depth": [2, 3, 4, 5]}


@dataclass(frozen=True)
class GbtParams:
    n_estimators: int = 140
    max_depth: int = 4
    learning_rate: float = 0.1
    min_leaf: int = 1
    reg_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise ValidationError(f"invalid boosting parameters: {self}")
        if not (0 < self.learning_rate <= 1) or self.reg_lambda < 0:
            raise ValidationError(f"invalid boosting parameters: {self}")


@dataclass
class GbtModel:
    """Boosted ensemble: trees[r][k] is the node list for round r, class k."""

    classes: tuple[int, ...]
    learning_rate: float
    base_scores: np.ndarray
    trees: list[list[list[dict]]]
    meta: dict

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_json(self) -> str:
        flat = [tree for round_trees in self.trees for tree in round_trees]
        doc = {
            "classes": list(self.classes),
            "learning_rate": self.learning_rate,
            "base_scores": self.base_scores.tolist(),
            "trees": flat,
            "meta": self.meta,
        }
        return json.dumps(doc, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        doc = json.loads(text)
        k = len(doc["classes"])
        flat = doc["trees"]
        if len(flat) % k:
            raise ValidationError("tree count is not a multiple of the class count")
        trees = [flat[i : i + k] for i in range(0, len(flat), k)]
        return cls(
            classes=tuple(doc["classes"]),
            learning_rate=float(doc["learning_rate"]),
            base_scores=np.asarray(doc["base_scores"], dtype=np.float64),
            trees=trees,
            meta=doc["meta"],
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "GbtModel":
        return cls.from_json(Path(path).read_text())


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(prob: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(prob[np.arange(len(y)), y], 1e-15, 1.0)
    # summing in sorted order keeps the value invariant to row permutations
    return float(-np.sort(np.log(p)).sum() / len(y))


def _best_split(Xn, g, h, min_leaf, lam):
    """Best (feature, threshold, gain) over all exact splits, or None."""
    n = len(g)
    if n < 2 * min_leaf:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    gl = np.cumsum(g[order], axis=0)[:-1]
    hl = np.cumsum(h[order], axis=0)[:-1]
    gt, ht = g.sum(), h.sum()
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        pos = np.arange(1, n)[:, None]
        valid &= (pos >= min_leaf) & (n - pos >= min_leaf)
    if not valid.any():
        return None
    parent = gt * gt / (ht + lam)
    gain = gl * gl / (hl + lam) + (gt - gl) ** 2 / (ht - hl + lam) - parent
    gain[~valid] = -np.inf
    best_pos = np.argmax(gain, axis=0)
    per_feature = gain[best_pos, np.arange(gain.shape[1])]
    f = int(np.argmax(per_feature))
    if per_feature[f] <= 0:
        return None
    i = int(best_pos[f])
    thr = 0.5 * (xs[i, f] + xs[i + 1, f])
    return f, float(thr), order[: i + 1, f], order[i + 1 :, f]


def _build_tree(X, rows, g, h, params) -> tuple[list[dict], np.ndarray]:
    """Greedy tree on the given rows; returns (nodes, per-row score delta)."""
    lam, lr = params.reg_lambda, params.learning_rate
    nodes: list[dict] = []
    delta = np.zeros(X.shape[0])

    def make(rows, depth):
        nid = len(nodes)
        nodes.append(None)
        split = None
        if depth < params.max_depth and len(rows) >= 2 * params.min_leaf:
            split = _best_split(X[rows], g[rows], h[rows], params.min_leaf, lam)
        if split is None:
            w = -lr * g[rows].sum() / (h[rows].sum() + lam)
            nodes[nid] = {"leaf": float(w)}
            delta[rows] = w
            return nid
        f, thr, left_local, right_local = split
        left_rows = rows[left_local]
        right_rows = rows[right_local]
        node = {"split": {"f": int(f), "thr": thr}, "l": -1, "r": -1}
        nodes[nid] = node
        node["l"] = make(left_rows, depth + 1)
        node["r"] = make(right_rows, depth + 1)
        return nid

    make(rows, 0)
    return nodes, delta


def _predict_tree(nodes: list[dict], X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(0, np.arange(len(X)))]
    while stack:
        nid, rows = stack.pop()
        if rows.size == 0:
            continue
        node = nodes[nid]
        if "leaf" in node:
            out[rows] = node["leaf"]
        else:
            f = node["split"]["f"]
            thr = node["split"]["thr"]
            left = X[rows, f] < thr
            stack.append((node["l"], rows[left]))
            stack.append((node["r"], rows[~left]))
    return out


def _boost(X, y_idx, k_classes, params, n_rounds):
    """Yield (round_trees, train_scores, train_loss) per boosting round."""
    n = len(y_idx)
    counts = np.bincount(y_idx, minlength=k_classes).astype(np.float64)
    base = np.log(counts / n)
    scores = np.tile(base, (n, 1))
    rows = np.arange(n)
    onehot = np.eye(k_classes)[y_idx]
    for _ in range(n_rounds):
        p = _softmax(scores)
        round_trees = []
        for k in range(k_classes):
            g = p[:, k] - onehot[:, k]
            h = p[:, k] * (1.0 - p[:, k])
            nodes, delta = _build_tree(X, rows, g, h, params)
            scores[:, k] += delta
            round_trees.append(nodes)
        yield round_trees, scores, _log_loss(_softmax(scores), y_idx)


def gbt_fit(X, y, params: GbtParams = GbtParams(), feature_names=None,
            train_case_ids=None) -> GbtModel:
    """Fit the boosted ensemble; training log-loss per round goes into meta."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValidationError("X must be (n, f) with matching y")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain NaN or Inf")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ValidationError("need at least 2 classes to fit")
    class_index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([class_index[int(v)] for v in y])
    counts = np.bincount(y_idx, minlength=len(classes)).astype(np.float64)
    base = np.log(counts / len(y))

    trees = []
    losses = []
    for round_trees, _, loss in _boost(X, y_idx, len(classes), params, params.n_estimators):
        trees.append(round_trees)
        losses.append(loss)

    meta = {
        "n_estimators": params.n_estimators,
        "max_depth": params.max_depth,
        "min_leaf": params.min_leaf,
        "reg_lambda": params.reg_lambda,
        "seed": params.seed,
        "n_features": int(X.shape[1]),
        "feature_names": list(feature_names) if feature_names is not None else None,
        "train_case_ids": list(train_case_ids) if train_case_ids is not None else None,
        "train_loss": losses,
    }
    return GbtModel(
        classes=classes,
        learning_rate=params.learning_rate,
        base_scores=base,
        trees=trees,
        meta=meta,
    )


def gbt_predict_proba(model: GbtModel, X) -> np.ndarray:
    """Softmax class probabilities; rows sum to 1."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    scores = np.tile(model.base_scores, (len(X), 1))
    for round_trees in model.trees:
        for k, nodes in enumerate(round_trees):
            scores[:, k] += _predict_tree(nodes, X)
    p = _softmax(scores)
    return p[0] if single else p


# ------------------------------------------------------- cross validation ----


@dataclass(frozen=True)
class CvSplit:
    """Fold assignment per case, stratified by (label, center)."""

    fold_of: np.ndarray
    k: int

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=np.int64).copy()
        if fold_of.min() < 0 or fold_of.max() >= self.k:
            raise ValidationError("fold indices out of range")
        fold_of.setflags(write=False)
        object.__setattr__(self, "fold_of", fold_of)

    def folds(self):
        return [np.nonzero(self.fold_of == f)[0] for f in range(self.k)]


def stratified_kfold(labels, centers, k: int, seed: int) -> CvSplit:
    """Deterministic stratified folds: per-fold class counts stay within +-1
    of proportional, and every (label, center) stratum is spread round-robin."""
    labels = np.asarray(labels)
    centers = np.asarray(centers)
    if k < 2:
        raise ValidationError("k must be >= 2")
    if len(labels) != len(centers) or len(labels) < k:
        raise ValidationError("need at least k cases with matching centers")
    rng = np.random.default_rng(seed)
    fold_of = np.full(len(labels), -1, dtype=np.int64)
    for lab in sorted(np.unique(labels).tolist()):
        pointer = int(rng.integers(k))
        for cen in sorted(np.unique(centers).tolist()):
            idx = np.nonzero((labels == lab) & (centers == cen))[0]
            idx = rng.permutation(idx)
            for i in idx:
                fold_of[i] = pointer % k
                pointer += 1
    return CvSplit(fold_of=fold_of, k=k)


def _expand_grid(grid: dict) -> list[dict]:
    keys = list(grid.keys())
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(X, y, centers, grid: dict, k: int, seed: int,
                base_params: GbtParams = GbtParams()):
    """Mean validation accuracy over stratified folds for every grid point.

    Returns (best_params, results) where results has one row per grid point in
    canonical enumeration order; ties keep the earliest point. Grid points
    differing only in n_estimators share one boosting run per fold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    points = _expand_grid(grid)
    if not points:
        raise ValidationError("empty parameter grid")
    split = stratified_kfold(y, centers, k, seed)
    folds = split.folds()

    # group points sharing everything except n_estimators
    groups: dict[tuple, list[int]] = {}
    for i, pt in enumerate(points):
        key = tuple(sorted((kk, vv) for kk, vv in pt.items() if kk != "n_estimators"))
        groups.setdefault(key, []).append(i)

    accs = np.zeros((len(points), k))
    for _, members in groups.items():
        rounds_needed = [points[i].get("n_estimators", base_params.n_estimators) for i in members]
        max_rounds = max(rounds_needed)
        proto = {kk: vv for kk, vv in points[members[0]].items() if kk != "n_estimators"}
        params = GbtParams(**{**asdict(base_params), **proto, "n_estimators": max_rounds})
        for fi, val_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(len(y)), val_idx)
            ytr = y[train_idx]
            class_index = {int(c): i for i, c in enumerate(np.unique(ytr))}
            y_tr_idx = np.array([class_index[int(v)] for v in ytr])
            kc = len(class_index)
            counts = np.bincount(y_tr_idx, minlength=kc).astype(np.float64)
            val_scores = np.tile(np.log(counts / len(ytr)), (len(val_idx), 1))
            inv_classes = {i: c for c, i in class_index.items()}
            checkpoints = {r: [m for m, r2 in zip(members, rounds_needed) if r2 == r]
                           for r in set(rounds_needed)}
            rnum = 0
            for round_trees, _, _ in _boost(X[train_idx], y_tr_idx, kc, params, max_rounds):
                for kk, nodes in enumerate(round_trees):
                    val_scores[:, kk] += _predict_tree(nodes, X[val_idx])
                rnum += 1
                if rnum in checkpoints:
                    preds = np.array([inv_classes[i] for i in np.argmax(val_scores, axis=1)])
                    acc = float((preds == y[val_idx]).mean())
                    for m in checkpoints[rnum]:
                        accs[m, fi] = acc

    results = []
    best_i = 0
    best_acc = -1.0
    for i, pt in enumerate(points):
        mean_acc = float(accs[i].mean())
        results.append({"params": pt, "fold_accuracy": accs[i].tolist(), "mean_accuracy": mean_acc})
        if mean_acc > best_acc:
            best_acc = mean_acc
            best_i = i
    best = GbtParams(**{**asdict(base_params), **points[best_i]})
    return best, results


def cross_val_probabilities(X, y, centers, params: GbtParams, k: int, seed: int) -> np.ndarray:
    """Out-of-fold class probabilities from per-fold refits at fixed params."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = sorted(int(c) for c in np.unique(y))
    split = stratified_kfold(y, centers, k, seed)
    out = np.zeros((len(y), len(classes)))
    for val_idx in split.folds():
        train_idx = np.setdiff1d(np.arange(len(y)), val_idx)
        model = gbt_fit(X[train_idx], y[train_idx], params)
        probs = gbt_predict_proba(model, X[val_idx])
        for ci, c in enumerate(model.classes):
            out[val_idx, classes.index(c)] = probs[:, ci]
    return out
