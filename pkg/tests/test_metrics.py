"""Classification and segmentation metrics against brute-force oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    auc_ovr_macro_oracle,
    confusion_metrics_oracle,
    dice_oracle,
    hd95_oracle,
)
from panrisk.errors import ValidationError
from panrisk.metrics import (
    accuracy,
    auc_ovr_macro,
    dice,
    evaluation_report,
    hd95,
    macro_precision_recall,
)
from panrisk.volume import Mask


def test_accuracy_trivial():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([0, 1], [0, 2]) == 0.5


def test_confusion_metrics_match_oracle(rng):
    for _ in range(10):
        labels = rng.integers(0, 3, size=100)
        preds = rng.integers(0, 3, size=100)
        acc, pr, rc = confusion_metrics_oracle(preds.tolist(), labels.tolist())
        assert accuracy(preds, labels) == pytest.approx(acc)
        got_pr, got_rc = macro_precision_recall(preds, labels)
        assert got_pr == pytest.approx(pr)
        assert got_rc == pytest.approx(rc)


def test_metrics_invariant_under_joint_relabeling(rng):
    labels = rng.integers(0, 3, size=60)
    preds = rng.integers(0, 3, size=60)
    perm = {0: 2, 1: 0, 2: 1}
    labels2 = np.array([perm[int(v)] for v in labels])
    preds2 = np.array([perm[int(v)] for v in preds])
    assert accuracy(preds, labels) == accuracy(preds2, labels2)
    assert macro_precision_recall(preds, labels) == pytest.approx(
        macro_precision_recall(preds2, labels2)
    )


def test_auc_perfectly_ordered():
    labels = np.array([0] * 5 + [1] * 5)
    probs = np.zeros((10, 2))
    probs[:, 1] = np.linspace(0, 1, 10)
    probs[:, 0] = 1 - probs[:, 1]
    assert auc_ovr_macro(probs, labels) == 1.0


def test_auc_all_equal_scores_is_half():
    labels = np.array([0, 0, 1, 1, 2, 2])
    probs = np.full((6, 3), 1 / 3)
    assert auc_ovr_macro(probs, labels) == pytest.approx(0.5)


def test_auc_matches_pair_counting_oracle(rng):
    for _ in range(10):
        labels = rng.integers(0, 3, size=30)
        if len(np.unique(labels)) < 2:
            continue
        probs = rng.dirichlet([1, 1, 1], size=30)
        # ties are likely under quantization; makes the tie path real
        probs = np.round(probs, 2)
        assert auc_ovr_macro(probs, labels) == pytest.approx(
            auc_ovr_macro_oracle(probs, labels), abs=1e-12
        )


def test_auc_invariant_under_monotone_transform(rng):
    labels = rng.integers(0, 3, size=40)
    probs = rng.dirichlet([1, 1, 1], size=40)
    a = auc_ovr_macro(probs, labels)
    b = auc_ovr_macro(np.exp(3.0 * probs), labels)
    assert a == pytest.approx(b, abs=1e-12)


# ------------------------------------------------------------ segmentation ----


def ball_mask(center, r, dims=(16, 16, 16), spacing=(1.0, 1.0, 1.0)):
    grids = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    return Mask(data=d2 <= r * r, spacing=spacing)


def test_dice_identical_and_disjoint():
    a = ball_mask((8, 8, 8), 4)
    assert dice(a, a) == 1.0
    assert hd95(a, a) == 0.0
    b = ball_mask((3, 3, 3), 2)
    c = ball_mask((12, 12, 12), 2)
    assert dice(b, c) == 0.0


def test_dice_hd95_match_bruteforce(rng):
    for _ in range(5):
        da = rng.random((16, 16, 16)) < 0.25
        db = rng.random((16, 16, 16)) < 0.25
        da[8, 8, 8] = db[8, 8, 8] = True
        spacing = (1.0, 1.5, 0.75)
        a = Mask(data=da, spacing=spacing)
        b = Mask(data=db, spacing=spacing)
        assert dice(a, b) == pytest.approx(dice_oracle(da, db), abs=1e-12)
        assert hd95(a, b) == pytest.approx(hd95_oracle(da, db, spacing), abs=1e-9)


def test_dice_hd95_symmetric(rng):
    da = rng.random((12, 12, 12)) < 0.3
    db = rng.random((12, 12, 12)) < 0.3
    da[5, 5, 5] = db[6, 6, 6] = True
    a, b = Mask(data=da), Mask(data=db)
    assert dice(a, b) == dice(b, a)
    assert hd95(a, b) == hd95(b, a)
    assert dice(a, b) >= 0.0 and dice(a, b) <= 1.0


def test_hd95_requires_nonempty():
    a = ball_mask((8, 8, 8), 3)
    empty = Mask(data=np.zeros((16, 16, 16), bool))
    with pytest.raises(ValidationError):
        hd95(a, empty)


def test_hd95_uses_physical_spacing():
    da = np.zeros((10, 4, 4), bool)
    db = np.zeros((10, 4, 4), bool)
    da[2, 2, 2] = True
    db[7, 2, 2] = True
    d1 = hd95(Mask(data=da), Mask(data=db))
    d2 = hd95(Mask(data=da, spacing=(2.0, 1.0, 1.0)), Mask(data=db, spacing=(2.0, 1.0, 1.0)))
    assert d2 == pytest.approx(2.0 * d1)


def test_evaluation_report_fields(rng):
    labels = rng.integers(0, 3, size=40)
    probs = rng.dirichlet([1, 1, 1], size=40)
    rep = evaluation_report(probs, labels)
    assert set(rep) == {"acc", "auc", "pr", "rc", "per_class", "n"}
    assert rep["n"] == 40
    assert set(rep["per_class"]) == {"0", "1", "2"}
