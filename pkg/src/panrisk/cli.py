"""Command-line entry points for the batch pipeline.

Subcommands: phantom, preprocess, extract, clinical, train, fuse, evaluate,
run. Configuration comes from an optional YAML file; any key can be
overridden with repeated ``--set key=value`` flags (values parsed as YAML).
Exit codes: 0 success, 2 config/input, 3 file format, 4 validation,
5 leakage, 1 unexpected.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .errors import ConfigError, FormatError, LeakageError, ValidationError
from .phantom import default_phantom_spec, generate_study
from .pipeline import (
    PipelineConfig,
    load_config,
    run_pipeline,
    stage_clinical,
    stage_evaluate,
    stage_extract,
    stage_fuse,
    stage_preprocess,
    stage_split,
    stage_train,
)

_EXIT_CODES = (
    (LeakageError, 5, "leakage"),
    (ValidationError, 4, "validation"),
    (FormatError, 3, "format"),
    (ConfigError, 2, "config"),
    (FileNotFoundError, 2, "config"),
)


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def _add_common(p: argparse.ArgumentParser, need_study: bool = True) -> None:
    if need_study:
        p.add_argument("--study", required=True, help="study tree directory")
    p.add_argument("--workdir", required=True, help="artifact directory")
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--kfold", type=int, default=None)


def _config_from_args(args, require_seed: bool = False) -> PipelineConfig:
    overrides = _parse_overrides(getattr(args, "overrides", None))
    cfg = load_config(
        path=getattr(args, "config", None),
        overrides=overrides,
        seed=args.seed,
        jobs=getattr(args, "jobs", None),
        test_fraction=getattr(args, "test_fraction", None),
        kfold=getattr(args, "kfold", None),
    )
    if require_seed and args.seed is None and "seed" not in overrides and (
        getattr(args, "config", None) is None
    ):
        raise ConfigError("run requires an explicit --seed")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panrisk",
                                     description="pancreatic cyst risk stratification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic multi-center study")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cases", default="50,50,50", help="cases per class, comma separated")
    p.add_argument("--dims", default="64,64,64", help="volume dims, comma separated")

    for name in ("preprocess", "extract"):
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(p)

    for name in ("clinical", "train"):
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(p, need_study=False)

    p = sub.add_parser("fuse", help="select fusion parameters on validation folds")
    _add_common(p, need_study=False)
    p.add_argument("--dl-probs", default=None, help="external DL probability CSV")

    p = sub.add_parser("evaluate", help="blind-test evaluation with leakage guard")
    _add_common(p, need_study=False)
    p.add_argument("--dl-probs", default=None)

    p = sub.add_parser("run", help="end-to-end pipeline")
    _add_common(p)
    p.add_argument("--dl-probs", default=None)

    return parser


def _dispatch(args) -> int:
    if args.command == "phantom":
        n = tuple(int(v) for v in args.cases.split(","))
        dims = tuple(int(v) for v in args.dims.split(","))
        if len(n) != 3 or len(dims) != 3:
            raise ConfigError("--cases and --dims need exactly three values")
        spec = default_phantom_spec(n_per_class=n, seed=args.seed, dims=dims)
        case_ids = generate_study(spec, args.out)
        print(f"wrote {len(case_ids)} cases to {args.out}")
        return 0

    require_seed = args.command == "run"
    cfg = _config_from_args(args, require_seed=require_seed)

    if args.command == "preprocess":
        stage_split(args.study, args.workdir, cfg)
        stage_preprocess(args.study, args.workdir, cfg)
    elif args.command == "extract":
        stage_extract(args.study, args.workdir, cfg)
    elif args.command == "clinical":
        stage_clinical(args.workdir, cfg)
    elif args.command == "train":
        stage_train(args.workdir, cfg)
    elif args.command == "fuse":
        stage_fuse(args.workdir, cfg, args.dl_probs)
    elif args.command == "evaluate":
        report = stage_evaluate(args.workdir, cfg, args.dl_probs)
        print((args.workdir + "/report.txt: ") + f"acc={report['radiomics']['acc']:.4f}")
    elif args.command == "run":
        report = run_pipeline(args.study, args.workdir, cfg, args.dl_probs)
        print(f"radiomics acc={report['radiomics']['acc']:.4f}"
              + (f" fused acc={report['fused']['acc']:.4f}" if report["fused"] else ""))
    else:  # pragma: no cover
        raise ConfigError(f"unknown command {args.command}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except Exception as e:  # noqa: BLE001
        for exc_type, code, category in _EXIT_CODES:
            if isinstance(e, exc_type):
                print(f"error category={category} message={e}", file=sys.stderr)
                return code
        print(f"error category=internal message={e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
