"""Clinical covariates and the statistical screening: mask volumetry, OLS
regression with t-based p-values, bidirectional stepwise selection, and
Welch's t-test.

Student-t tail probabilities come from an in-package regularized incomplete
beta function (continued-fraction evaluation, relative error below 1e-10), so
no statistics library is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .volume import Mask, mask_bounding_box

__all__ = [
    "CLINICAL_FEATURE_NAMES",
    "ClinicalRecord",
    "OlsResult",
    "mask_volume_ml",
    "mask_diagonal_mm",
    "ols_fit",
    "stepwise_select",
    "welch_ttest",
    "student_t_two_sided_p",
    "betainc_reg",
]

CLINICAL_FEATURE_NAMES = (
    "diabetes",
    "volume_ml",
    "diagonal_mm",
    "vol_over_diag",
    "age",
    "gender",
    "bmi",
    "chronic_pancreatitis",
)


@dataclass(frozen=True)
class ClinicalRecord:
    """Per-case clinical covariates and the risk label (0 healthy, 1 low, 2 high)."""

    case_id: str
    diabetes: float
    volume_ml: float
    diagonal_mm: float
    vol_over_diag: float
    age: float
    gender: float
    bmi: float
    chronic_pancreatitis: float
    label: int

    def features(self) -> np.ndarray:
        return np.array(
            [getattr(self, k) for k in CLINICAL_FEATURE_NAMES], dtype=np.float64
        )


def mask_volume_ml(m: Mask) -> float:
    """Foreground voxel count times voxel volume, in milliliters."""
    n = m.foreground_count()
    if n == 0:
        raise ValidationError("empty mask")
    return n * m.voxel_volume_mm3 / 1000.0


def mask_diagonal_mm(m: Mask) -> float:
    """Physical-space diagonal of the tight bounding box over foreground."""
    box = mask_bounding_box(m, margin_vox=0)
    extent = [(h - l) * s for l, h, s in zip(box.lo, box.hi, m.spacing)]
    return float(math.sqrt(sum(e * e for e in extent)))


# ------------------------------------------------------ t distribution ----


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    raise ValidationError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValidationError("betainc_reg requires a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + b * math.log1p(-x) + a * math.log(x)
    ) * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided tail probability of Student's t: I_{v/(v+t^2)}(v/2, 1/2)."""
    if dof <= 0:
        raise ValidationError("dof must be positive")
    if not np.isfinite(t):
        return 0.0
    return betainc_reg(dof / 2.0, 0.5, dof / (dof + t * t))


# ----------------------------------------------------------------- OLS ----


@dataclass(frozen=True)
class OlsResult:
    """Coefficient table with intercept first, plus fit summary."""

    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    n: int
    dof: int

    def __post_init__(self):
        for f in ("coefficients", "standard_errors", "t_values", "p_values"):
            a = np.asarray(getattr(self, f), dtype=np.float64).copy()
            a.setflags(write=False)
            object.__setattr__(self, f, a)


def ols_fit(X: np.ndarray, y: np.ndarray) -> OlsResult:
    """Least squares with an intercept; p-values from the t distribution."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValidationError("X must be (n, p) and y length n")
    n, p = X.shape
    if n <= p + 1:
        raise ValidationError(f"need n > p+1 observations, got n={n}, p={p}")
    design = np.hstack([np.ones((n, 1)), X])
    if np.linalg.matrix_rank(design) < p + 1:
        raise ValidationError("design matrix is rank deficient")
    xtx = design.T @ design
    xtx_inv = np.linalg.inv(xtx)
    coef = xtx_inv @ design.T @ y
    resid = y - design @ coef
    rss = float(resid @ resid)
    dof = n - (p + 1)
    sigma2 = rss / dof
    se = np.sqrt(np.clip(np.diag(xtx_inv) * sigma2, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.inf * np.sign(coef + (coef == 0)))
    pvals = np.array([student_t_two_sided_p(float(tv), dof) for tv in t])
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return OlsResult(
        coefficients=coef,
        standard_errors=se,
        t_values=t,
        p_values=pvals,
        r_squared=float(min(max(r2, 0.0), 1.0)),
        n=n,
        dof=dof,
    )


def stepwise_select(
    X: np.ndarray,
    y: np.ndarray,
    p_enter: float = 0.05,
    p_remove: float = 0.10,
) -> tuple[list[int], OlsResult | None]:
    """Bidirectional stepwise selection on predictor columns.

    Repeatedly adds the outside predictor with the smallest p-value if below
    p_enter, then drops any inside predictor whose p-value exceeds p_remove,
    until a fixpoint. Ties break toward the lowest column index. Candidates
    that make the design rank deficient are skipped.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_pred = X.shape[1]
    inside: list[int] = []
    seen: set[frozenset] = set()
    for _ in range(2 * n_pred + 8):
        changed = False
        # forward: smallest p-value below p_enter
        best_j, best_p = None, None
        for j in range(n_pred):
            if j in inside:
                continue
            cols = sorted(inside + [j])
            try:
                res = ols_fit(X[:, cols], y)
            except ValidationError:
                continue
            pj = float(res.p_values[1 + cols.index(j)])
            if best_p is None or pj < best_p:
                best_j, best_p = j, pj
        if best_j is not None and best_p < p_enter:
            inside = sorted(inside + [best_j])
            changed = True
        # backward: largest p-value above p_remove
        if inside:
            res = ols_fit(X[:, inside], y)
            worst_k, worst_p = None, None
            for k, j in enumerate(inside):
                pj = float(res.p_values[1 + k])
                if worst_p is None or pj > worst_p:
                    worst_k, worst_p = k, pj
            if worst_p is not None and worst_p > p_remove:
                inside = [j for i, j in enumerate(inside) if i != worst_k]
                changed = True
        state = frozenset(inside)
        if not changed or state in seen:
            break
        seen.add(state)
    final = ols_fit(X[:, inside], y) if inside else None
    return inside, final


def welch_ttest(a, b) -> tuple[float, float, float]:
    """Welch's unequal-variance t-test; returns (t, dof, two-sided p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValidationError("welch_ttest needs at least 2 samples per group")
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    if va <= 0 and vb <= 0:
        raise ValidationError("welch_ttest needs positive variance in at least one sample")
    sa, sb = va / a.size, vb / b.size
    t = (float(a.mean()) - float(b.mean())) / math.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    return t, dof, student_t_two_sided_p(t, dof)
