"""End-to-end batch pipeline: split, preprocess, extract, screen, train,
fuse, evaluate.

Every fitted artifact (landmark models, stepwise selection, scaler, boosted
model, fusion parameters) records the case ids it was trained on; evaluation
refuses to run if any blind-test id appears in any of those lists. Reruns
with the same config and inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import clinical as clin
from .errors import ConfigError, FormatError, LeakageError, ValidationError
from .fusion import FusionParams, default_k_grid, default_t_grid, fuse, fusion_grid_search
from .gbt import GbtModel, GbtParams, cross_val_probabilities, gbt_fit, gbt_predict_proba, grid_search
from .metrics import evaluation_report, roc_points
from .nifti import load_mask, load_volume, save_nifti
from .preprocess import (
    DEFAULT_RANKS,
    DEFAULT_SCALE_BOUNDS,
    NyulModel,
    correct_bias,
    denoise_median,
    nyul_apply,
    nyul_train,
)
from .radiomics import FEATURE_NAMES, apply_scaler, extract_feature_vector, fit_scaler
from .radiomics.scaling import FeatureScaler
from .tables import (
    FeatureTable,
    feature_table_columns,
    read_clinical_csv,
    read_dl_probabilities,
)
from .volume import crop_roi, mask_bounding_box, reorient_ras, resample_isotropic

__all__ = ["PipelineConfig", "run_pipeline", "stage_split", "stage_preprocess",
           "stage_extract", "stage_clinical", "stage_train", "stage_fuse",
           "stage_evaluate", "load_config", "check_leakage"]

log = logging.getLogger("panrisk")

CONTRASTS = ("t1", "t2")


# ----------------------------------------------------------------- config ----


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    test_fraction: float = 0.2
    kfold: int = 5
    jobs: int = 1
    resample_mm: float = 1.0
    roi_margin_vox: int = 5
    bias_sigma_mm: float = 30.0
    median_radius: int = 1
    discretize_ng: int = 32
    impute_clinical: bool = False
    nyul_ranks: tuple[float, ...] = DEFAULT_RANKS
    nyul_scale_bounds: tuple[float, float] = DEFAULT_SCALE_BOUNDS
    stepwise_p_enter: float = 0.05
    stepwise_p_remove: float = 0.10
    gbt_learning_rate: float = 0.1
    gbt_min_leaf: int = 1
    gbt_reg_lambda: float = 1.0
    gbt_grid_n_estimators: tuple[int, ...] = (60, 100, 140, 180)
    gbt_grid_max_depth: tuple[int, ...] = (2, 3, 4, 5)
    fusion_k_grid: tuple[float, ...] = tuple(default_k_grid())
    fusion_t_grid: tuple[float, ...] = tuple(default_t_grid())

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.kfold < 2 or self.jobs < 1:
            raise ConfigError("kfold must be >= 2 and jobs >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def load_config(path=None, overrides: dict | None = None, **kwargs) -> PipelineConfig:
    """Build the config from an optional YAML file, dotted overrides, and kwargs."""
    data: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config file must hold a mapping")
        data.update(loaded)
    for k, v in (overrides or {}).items():
        data[k.replace(".", "_")] = v
    data.update({k: v for k, v in kwargs.items() if v is not None})
    valid = set(PipelineConfig.__dataclass_fields__)
    unknown = set(data) - valid
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("nyul_ranks", "nyul_scale_bounds", "gbt_grid_n_estimators",
                "gbt_grid_max_depth", "fusion_k_grid", "fusion_t_grid"):
        if key in data and isinstance(data[key], list):
            data[key] = tuple(data[key])
    try:
        return PipelineConfig(**data)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _read_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise FormatError(f"missing artifact {p}; run earlier pipeline stages first")
    return json.loads(p.read_text())


def _timed(name):
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            log.info("stage=%s elapsed=%.2fs", name, time.perf_counter() - self.t0)

    return _Timer()


# ------------------------------------------------------------------ split ----


def _read_labels(study_dir) -> tuple[list[str], list[str], np.ndarray]:
    path = Path(study_dir) / "labels.csv"
    if not path.exists():
        raise FormatError(f"missing {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["case_id", "center", "label"]:
            raise FormatError(f"{path}: header must be case_id,center,label")
        case_ids, centers, labels = [], [], []
        for row in reader:
            case_ids.append(row["case_id"])
            centers.append(row["center"])
            labels.append(int(row["label"]))
    if len(set(case_ids)) != len(case_ids):
        raise FormatError(f"{path}: duplicate case ids")
    return case_ids, centers, np.array(labels, dtype=np.int64)


def make_blind_split(case_ids, labels, centers, test_fraction: float, seed: int):
    """Stratified random blind split by (label, center), largest-remainder quotas."""
    n = len(case_ids)
    target = round(test_fraction * n)
    rng = np.random.default_rng(seed)
    strata: dict[tuple, list[int]] = {}
    for i in range(n):
        strata.setdefault((int(labels[i]), centers[i]), []).append(i)
    keys = sorted(strata.keys(), key=lambda kc: (kc[0], kc[1]))
    quotas = {k: len(strata[k]) * test_fraction for k in keys}
    base = {k: int(np.floor(quotas[k])) for k in keys}
    leftover = target - sum(base.values())
    by_rem = sorted(keys, key=lambda k: (-(quotas[k] - base[k]), keys.index(k)))
    for k in by_rem[: max(0, leftover)]:
        if base[k] < len(strata[k]):
            base[k] += 1
    test_idx = []
    for k in keys:
        perm = rng.permutation(strata[k])
        test_idx.extend(int(i) for i in perm[: base[k]])
    test_set = set(test_idx)
    train_ids = [case_ids[i] for i in range(n) if i not in test_set]
    test_ids = [case_ids[i] for i in sorted(test_set)]
    return train_ids, test_ids


def stage_split(study_dir, workdir, config: PipelineConfig) -> dict:
    with _timed("split"):
        case_ids, centers, labels = _read_labels(study_dir)
        train_ids, test_ids = make_blind_split(
            case_ids, labels, centers, config.test_fraction, config.seed
        )
        doc = {
            "seed": config.seed,
            "test_fraction": config.test_fraction,
            "train_ids": train_ids,
            "test_ids": test_ids,
        }
        Path(workdir).mkdir(parents=True, exist_ok=True)
        _write_json(Path(workdir) / "split.json", doc)
    return doc


# ------------------------------------------------------------- preprocess ----


def _clean_case(args) -> str:
    """Reorient, bias-correct, and denoise one case into workdir/cleaned."""
    study_dir, workdir, case_id, bias_sigma_mm, median_radius = args
    case_in = Path(study_dir) / case_id
    case_out = Path(workdir) / "cleaned" / case_id
    case_out.mkdir(parents=True, exist_ok=True)
    mask = reorient_ras(load_mask(case_in / "mask.nii.gz"))
    save_nifti(mask, case_out / "mask.nii.gz")
    for tag in CONTRASTS:
        v = reorient_ras(load_volume(case_in / f"{tag}.nii.gz"))
        v = correct_bias(v, sigma_mm=bias_sigma_mm)
        v = denoise_median(v, radius_vox=median_radius)
        save_nifti(v, case_out / f"{tag}.nii.gz")
    return case_id


def _standardize_case(args) -> str:
    """Standardize intensities and resample one cleaned case into workdir/preprocessed."""
    workdir, case_id, model_dicts, resample_mm = args
    cleaned = Path(workdir) / "cleaned" / case_id
    out_dir = Path(workdir) / "preprocessed" / case_id
    out_dir.mkdir(parents=True, exist_ok=True)
    mask = load_mask(cleaned / "mask.nii.gz")
    save_nifti(resample_isotropic(mask, resample_mm, mode="nearest"), out_dir / "mask.nii.gz")
    for tag in CONTRASTS:
        model = NyulModel.from_dict(model_dicts[tag])
        v = load_volume(cleaned / f"{tag}.nii.gz")
        v = nyul_apply(v, model, mask)
        v = resample_isotropic(v, resample_mm, mode="linear")
        save_nifti(v, out_dir / f"{tag}.nii.gz")
    return case_id


def _map_cases(fn, args_list, jobs: int):
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, args_list))


def stage_preprocess(study_dir, workdir, config: PipelineConfig) -> None:
    workdir = Path(workdir)
    split = _read_json(workdir / "split.json")
    case_ids, _, _ = _read_labels(study_dir)

    with _timed("clean"):
        args = [
            (str(study_dir), str(workdir), cid, config.bias_sigma_mm, config.median_radius)
            for cid in case_ids
        ]
        _map_cases(_clean_case, args, config.jobs)

    with _timed("nyul_train"):
        train_ids = split["train_ids"]
        model_dicts = {}
        for tag in CONTRASTS:
            images = (load_volume(workdir / "cleaned" / cid / f"{tag}.nii.gz") for cid in train_ids)
            masks = (load_mask(workdir / "cleaned" / cid / "mask.nii.gz") for cid in train_ids)
            model = nyul_train(
                images, masks, ranks=config.nyul_ranks, scale_bounds=config.nyul_scale_bounds
            )
            _write_json(
                workdir / f"nyul_{tag}.json",
                {"model": model.to_dict(), "train_case_ids": list(train_ids)},
            )
            model_dicts[tag] = model.to_dict()

    with _timed("standardize"):
        args = [(str(workdir), cid, model_dicts, config.resample_mm) for cid in case_ids]
        _map_cases(_standardize_case, args, config.jobs)


# ---------------------------------------------------------------- extract ----


def _extract_case(args):
    """107 features per contrast plus mask-derived clinical covariates."""
    workdir, case_id, ng, margin = args
    pre = Path(workdir) / "preprocessed" / case_id
    mask = load_mask(pre / "mask.nii.gz")
    box = mask_bounding_box(mask, margin_vox=margin)
    mask_roi = crop_roi(mask, box)
    values = {}
    for tag in CONTRASTS:
        v = crop_roi(load_volume(pre / f"{tag}.nii.gz"), box)
        vec = extract_feature_vector(v, mask_roi, ng=ng, contrast=tag)
        values[tag] = vec.values

    cleaned_mask = load_mask(Path(workdir) / "cleaned" / case_id / "mask.nii.gz")
    vol_ml = clin.mask_volume_ml(cleaned_mask)
    diag_mm = clin.mask_diagonal_mm(cleaned_mask)
    return case_id, values["t1"], values["t2"], vol_ml, diag_mm


def stage_extract(study_dir, workdir, config: PipelineConfig) -> FeatureTable:
    workdir = Path(workdir)
    case_ids, centers, labels = _read_labels(study_dir)
    records = {
        r.case_id: r
        for r in read_clinical_csv(Path(study_dir) / "clinical.csv", impute=config.impute_clinical)
    }
    missing = [c for c in case_ids if c not in records]
    if missing:
        raise FormatError(f"clinical.csv is missing cases: {missing}")

    with _timed("extract"):
        args = [(str(workdir), cid, config.discretize_ng, config.roi_margin_vox) for cid in case_ids]
        results = _map_cases(_extract_case, args, config.jobs)
        by_case = {r[0]: r for r in results}

        columns = feature_table_columns()
        rows = np.zeros((len(case_ids), len(columns)))
        for i, cid in enumerate(case_ids):
            _, t1_vals, t2_vals, vol_ml, diag_mm = by_case[cid]
            rec = records[cid]
            clin_vals = [
                rec.diabetes, vol_ml, diag_mm, vol_ml / diag_mm,
                rec.age, rec.gender, rec.bmi, rec.chronic_pancreatitis,
            ]
            rows[i] = np.concatenate([t1_vals, t2_vals, np.array(clin_vals)])
        table = FeatureTable(
            case_ids=list(case_ids),
            centers=list(centers),
            labels=labels,
            feature_names=columns,
            values=rows,
        )
        table.save(workdir / "features.csv")
    return table


# --------------------------------------------------------------- clinical ----


def stage_clinical(workdir, config: PipelineConfig) -> dict:
    workdir = Path(workdir)
    split = _read_json(workdir / "split.json")
    table = FeatureTable.load(workdir / "features.csv")
    train = table.select_rows(split["train_ids"])

    with _timed("clinical"):
        cols = train.column_indices(clin.CLINICAL_FEATURE_NAMES)
        X = train.values[:, cols]
        y = train.labels.astype(np.float64)
        ols = clin.ols_fit(X, y)
        selected_idx, _ = clin.stepwise_select(
            X, y, p_enter=config.stepwise_p_enter, p_remove=config.stepwise_p_remove
        )
        selected = [clin.CLINICAL_FEATURE_NAMES[i] for i in selected_idx]

        vol = train.values[:, train.column_indices(["volume_ml"])[0]]
        ttests = {}
        for a, b, name in ((0, 2, "healthy_vs_high"), (0, 1, "healthy_vs_low"), (1, 2, "low_vs_high")):
            sa, sb = vol[train.labels == a], vol[train.labels == b]
            if len(sa) >= 2 and len(sb) >= 2:
                t, dof, p = clin.welch_ttest(sa, sb)
                ttests[name] = {"t": t, "dof": dof, "p": p}

        doc = {
            "predictors": list(clin.CLINICAL_FEATURE_NAMES),
            "ols": {
                "coefficients": ols.coefficients.tolist(),
                "standard_errors": ols.standard_errors.tolist(),
                "t_values": [float(t) for t in ols.t_values],
                "p_values": ols.p_values.tolist(),
                "r_squared": ols.r_squared,
                "n": ols.n,
                "dof": ols.dof,
            },
            "stepwise_selected": selected,
            "volume_ttests": ttests,
            "train_case_ids": split["train_ids"],
        }
        _write_json(workdir / "clinical_stats.json", doc)
    return doc


# ------------------------------------------------------------------ train ----


def _model_feature_names(selected_clinical) -> list[str]:
    return (
        [f"t1_{n}" for n in FEATURE_NAMES]
        + [f"t2_{n}" for n in FEATURE_NAMES]
        + list(selected_clinical)
    )


def stage_train(workdir, config: PipelineConfig) -> None:
    workdir = Path(workdir)
    split = _read_json(workdir / "split.json")
    stats = _read_json(workdir / "clinical_stats.json")
    table = FeatureTable.load(workdir / "features.csv")
    train = table.select_rows(split["train_ids"])

    feat_names = _model_feature_names(stats["stepwise_selected"])
    cols = train.column_indices(feat_names)

    with _timed("scaler"):
        scaler = fit_scaler(train.values[:, cols], feat_names)
        doc = scaler.to_dict()
        doc["train_case_ids"] = split["train_ids"]
        _write_json(workdir / "scaler.json", doc)

    X = apply_scaler(scaler, train.values[:, cols])
    y = train.labels
    centers = np.array(train.centers)

    with _timed("grid_search"):
        base = GbtParams(
            learning_rate=config.gbt_learning_rate,
            min_leaf=config.gbt_min_leaf,
            reg_lambda=config.gbt_reg_lambda,
            seed=config.seed,
        )
        grid = {
            "n_estimators": list(config.gbt_grid_n_estimators),
            "max_depth": list(config.gbt_grid_max_depth),
        }
        best, results = grid_search(X, y, centers, grid, k=config.kfold, seed=config.seed, base_params=base)
        _write_json(
            workdir / "cv_results.json",
            {
                "best_params": {"n_estimators": best.n_estimators, "max_depth": best.max_depth,
                                "learning_rate": best.learning_rate, "min_leaf": best.min_leaf,
                                "reg_lambda": best.reg_lambda, "seed": best.seed},
                "results": results,
                "train_case_ids": split["train_ids"],
            },
        )

    with _timed("oof_probabilities"):
        oof = cross_val_probabilities(X, y, centers, best, k=config.kfold, seed=config.seed)
        with open(workdir / "oof_probs.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case_id", "p_healthy", "p_low", "p_high"])
            for cid, p in zip(train.case_ids, oof):
                w.writerow([cid] + [repr(float(v)) for v in p])

    with _timed("final_fit"):
        model = gbt_fit(X, y, best, feature_names=feat_names, train_case_ids=split["train_ids"])
        model.save(workdir / "model.json")


# ------------------------------------------------------------------- fuse ----


def stage_fuse(workdir, config: PipelineConfig, dl_probs_path=None) -> dict:
    workdir = Path(workdir)
    split = _read_json(workdir / "split.json")
    with _timed("fuse"):
        if dl_probs_path is None:
            doc = {
                "skipped": True,
                "notice": "fusion skipped: no DL probability file supplied",
            }
            _write_json(workdir / "fusion.json", doc)
            return doc
        dl = read_dl_probabilities(dl_probs_path)
        train_ids = split["train_ids"]
        missing = [c for c in train_ids if c not in dl]
        if missing:
            raise FormatError(f"DL probabilities missing for training cases: {missing[:5]}")
        oof = {}
        with open(workdir / "oof_probs.csv", newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                oof[row["case_id"]] = [float(row["p_healthy"]), float(row["p_low"]), float(row["p_high"])]
        table = FeatureTable.load(workdir / "features.csv")
        train = table.select_rows(train_ids)
        p_dl = np.array([dl[c] for c in train_ids])
        p_r = np.array([oof[c] for c in train_ids])
        params, results = fusion_grid_search(
            p_dl, p_r, train.labels,
            k_grid=list(config.fusion_k_grid), t_grid=list(config.fusion_t_grid),
        )
        best_acc = max(r["accuracy"] for r in results)
        doc = {
            "skipped": False,
            "k": params.k,
            "t": params.t,
            "selection_accuracy": best_acc,
            "train_case_ids": train_ids,
        }
        _write_json(workdir / "fusion.json", doc)
    return doc


# --------------------------------------------------------------- evaluate ----


def check_leakage(test_ids, artifacts: dict[str, list | None]) -> None:
    """Abort if any fitted artifact saw a blind-test case."""
    test_set = set(test_ids)
    for name, train_list in artifacts.items():
        if not train_list:
            continue
        bad = sorted(test_set.intersection(train_list))
        if bad:
            raise LeakageError(
                f"artifact {name} was fitted on blind-test cases {bad[:5]}"
            )


def _probs_for(table: FeatureTable, scaler: FeatureScaler, model: GbtModel) -> np.ndarray:
    cols = table.column_indices(scaler.names)
    X = apply_scaler(scaler, table.values[:, cols])
    return gbt_predict_proba(model, X)


def stage_evaluate(workdir, config: PipelineConfig, dl_probs_path=None) -> dict:
    workdir = Path(workdir)
    split = _read_json(workdir / "split.json")
    scaler_doc = _read_json(workdir / "scaler.json")
    stats = _read_json(workdir / "clinical_stats.json")
    fusion_doc = _read_json(workdir / "fusion.json")
    model = GbtModel.load(workdir / "model.json")
    nyul_docs = {tag: _read_json(workdir / f"nyul_{tag}.json") for tag in CONTRASTS}

    test_ids = split["test_ids"]
    check_leakage(
        test_ids,
        {
            "nyul_t1": nyul_docs["t1"].get("train_case_ids"),
            "nyul_t2": nyul_docs["t2"].get("train_case_ids"),
            "clinical_stats": stats.get("train_case_ids"),
            "scaler": scaler_doc.get("train_case_ids"),
            "model": model.meta.get("train_case_ids"),
            "fusion": fusion_doc.get("train_case_ids"),
        },
    )

    with _timed("evaluate"):
        scaler = FeatureScaler.from_dict(scaler_doc)
        table = FeatureTable.load(workdir / "features.csv")
        test = table.select_rows(test_ids)
        probs = _probs_for(test, scaler, model)
        notices = []
        report = {
            "radiomics": evaluation_report(probs, test.labels),
            "fused": None,
            "fusion_params": None,
            "n_train": len(split["train_ids"]),
            "n_test": len(test_ids),
            "notices": notices,
        }
        _write_roc(workdir / "roc_radiomics.csv", roc_points(probs, test.labels))

        if fusion_doc.get("skipped", False):
            notices.append(fusion_doc.get("notice", "fusion skipped"))
        elif dl_probs_path is None:
            notices.append("fusion parameters present but no DL probability file supplied")
        else:
            dl = read_dl_probabilities(dl_probs_path)
            missing = [c for c in test_ids if c not in dl]
            if missing:
                raise FormatError(f"DL probabilities missing for test cases: {missing[:5]}")
            params = FusionParams(k=fusion_doc["k"], t=fusion_doc["t"])
            fused = np.array([fuse(dl[c], probs[i], params) for i, c in enumerate(test_ids)])
            report["fused"] = evaluation_report(fused, test.labels)
            report["fusion_params"] = {"k": params.k, "t": params.t}
            _write_roc(workdir / "roc_fused.csv", roc_points(fused, test.labels))

        _write_json(workdir / "report.json", report)
        (workdir / "report.txt").write_text(_format_report(report))
    return report


def _write_roc(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "threshold", "fpr", "tpr"])
        for ci, thr, fpr, tpr in rows:
            w.writerow([ci, repr(float(thr)), repr(float(fpr)), repr(float(tpr))])


def _format_report(report: dict) -> str:
    lines = ["risk stratification report", "=" * 40]
    for key in ("radiomics", "fused"):
        block = report.get(key)
        if block is None:
            continue
        lines.append(f"{key}: acc={block['acc']:.4f} auc={block['auc']:.4f} "
                     f"pr={block['pr']:.4f} rc={block['rc']:.4f} (n={block['n']})")
    if report.get("fusion_params"):
        lines.append(f"fusion: k={report['fusion_params']['k']} t={report['fusion_params']['t']}")
    for notice in report.get("notices", []):
        lines.append(f"notice: {notice}")
    lines.append(f"train/test cases: {report['n_train']}/{report['n_test']}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- run ----


def run_pipeline(study_dir, workdir, config: PipelineConfig, dl_probs_path=None) -> dict:
    """Execute every stage in order and return the final report."""
    t0 = time.perf_counter()
    stage_split(study_dir, workdir, config)
    stage_preprocess(study_dir, workdir, config)
    stage_extract(study_dir, workdir, config)
    stage_clinical(workdir, config)
    stage_train(workdir, config)
    stage_fuse(workdir, config, dl_probs_path)
    report = stage_evaluate(workdir, config, dl_probs_path)
    log.info("stage=run elapsed=%.2fs", time.perf_counter() - t0)
    return report
