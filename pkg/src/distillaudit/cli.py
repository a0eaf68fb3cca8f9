"""Command-line interface: calibrate, audit, test-missing, gen-synthetic.

Each subcommand maps onto library calls; failures surface as stage-tagged
messages on stderr with stable exit codes (2 config, 3 data, 4 training,
5 degenerate statistics). The audit writes artifacts as stages complete, so
a failed run keeps everything produced before the failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .baseline import linear_fold_metrics, train_linear_bags
from .calibrate import decide_calibration, diagnose, fit_calibration
from .data import LoadConfig, fit_schema, load_csv
from .distill import fidelity, plan_bags, train_paired, with_interactions
from .errors import (
    AuditError,
    ConfigError,
    DataError,
    DegenerateStatisticsError,
    TrainingError,
)
from .gam import TrainConfig
from .missing import correlation_test, error_pairs, load_error_pairs_csv
from .compare import summarize
from .report import (
    build_report,
    dump_json,
    save_all_models,
    write_calibration_plots,
    write_comparison_artifacts,
    write_report,
)
from .synth import GENERATORS

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_DEGENERATE = 5


class _Stage:
    """Mutable marker naming the pipeline stage an error belongs to."""

    def __init__(self) -> None:
        self.name = "startup"

    def at(self, name: str) -> None:
        self.name = name


def _read_config_file(path: str | None) -> tuple[dict, dict]:
    """Split a --config JSON file into load and train sections.

    Top-level keys ``load`` and ``train`` hold the two sections; a flat file
    with neither key is treated as a load config.
    """
    if path is None:
        return {}, {}
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config file must contain a JSON object")
    if "load" in d or "train" in d:
        extra = set(d) - {"load", "train"}
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
        return dict(d.get("load", {})), dict(d.get("train", {}))
    return d, {}


def _load_dataset(args, stage: _Stage):
    stage.at("config")
    load_dict, train_dict = _read_config_file(args.config)
    if args.score_col is not None:
        load_dict["score_column"] = args.score_col
    if args.outcome_col is not None:
        load_dict["outcome_column"] = args.outcome_col
    load_cfg = LoadConfig.from_dict(load_dict)
    train_dict.setdefault("seed", args.seed)
    if getattr(args, "pairs", None):
        train_dict["n_pairs"] = args.pairs
    train_cfg = TrainConfig.from_dict(train_dict)
    stage.at("load")
    data = load_csv(args.data, load_cfg)
    return data, load_cfg, train_cfg


def _calibration_stage(data, mode: str, out_dir: Path, stage: _Stage):
    """Shared by calibrate and audit: diagnose, decide, fit, write artifacts."""
    stage.at("calibrate")
    diag_raw = diagnose(data.score, data.outcome)
    decision = decide_calibration(diag_raw, mode)
    cmap = None
    diag_applied = None
    warning = None
    if decision["applied"]:
        cmap = fit_calibration(data.score, data.outcome)
        diag_applied = diagnose(cmap.apply(data.score), data.outcome)
    elif mode == "off" and diag_raw.logit_rmse > decision["threshold"]:
        warning = (
            f"calibration forced off, but log-odds linearity RMSE {diag_raw.logit_rmse:.4f} "
            f"exceeds threshold {decision['threshold']}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "decision": decision,
        "warning": warning,
        "diagnostics_raw": diag_raw.to_json_dict(),
        "diagnostics_applied": diag_applied.to_json_dict() if diag_applied else None,
        "map": cmap.to_json_dict() if cmap else None,
    }
    dump_json(out_dir / "calibration.json", record)
    diag_raw.to_csv(out_dir / "calibration_diagnostics.csv")
    write_calibration_plots(out_dir / "plots", diag_raw, diag_applied)
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    return decision, diag_raw, cmap


def cmd_calibrate(args, stage: _Stage) -> int:
    started = time.time()
    data, _, _ = _load_dataset(args, stage)
    out_dir = Path(args.out)
    decision, _, cmap = _calibration_stage(data, args.calibration, out_dir, stage)
    _write_run_meta(out_dir, started)
    applied = "calibrated" if decision["applied"] else "not calibrated"
    print(f"calibration: {applied} ({decision['reason']})")
    if cmap is not None:
        print(f"map: {len(cmap.breakpoints)} breakpoints -> {out_dir / 'calibration.json'}")
    return 0


def cmd_audit(args, stage: _Stage) -> int:
    started = time.time()
    data, load_cfg, train_cfg = _load_dataset(args, stage)
    out_dir = Path(args.out)
    decision, diag_raw, cmap = _calibration_stage(data, args.calibration, out_dir, stage)

    stage.at("plan")
    schema = fit_schema(data, load_cfg.max_bins)
    plan = plan_bags(data.n_rows, K=args.K, L=args.L, seed=args.seed)

    stage.at("train")
    paired = train_paired(data, cmap, plan, train_cfg, schema, jobs=args.jobs)
    fidelities = [fidelity(paired, data, name="additive")]
    final = paired
    if train_cfg.n_pairs > 0:
        final = with_interactions(paired, data, train_cfg.n_pairs, train_cfg, jobs=args.jobs)
        fidelities.append(fidelity(final, data, name="additive_interactions"))

    stage.at("baseline")
    bags = train_linear_bags(data, plan, cmap, schema)
    fidelities.append(linear_fold_metrics(data, plan, bags, cmap))

    stage.at("compare")
    summary = summarize(final)

    stage.at("missing-test")
    pairs = error_pairs(final, data)
    missing_json = None
    try:
        result = correlation_test(pairs.mimic_error, pairs.outcome_error, seed=args.seed)
        missing_json = result.to_json_dict()
    except DegenerateStatisticsError as exc:
        missing_json = {"skipped": str(exc)}
    missing_json["n_excluded_never_held_out"] = pairs.n_excluded_never_held_out
    missing_json["n_excluded_score_only"] = pairs.n_excluded_score_only
    pairs.to_csv(out_dir / "error_pairs.csv")

    stage.at("report")
    artifacts = write_comparison_artifacts(out_dir, summary)
    artifacts["models"] = [f"models/{n}" for n in save_all_models(out_dir, final, bags)]
    artifacts["calibration"] = ["calibration.json", "calibration_diagnostics.csv"]
    artifacts["error_pairs"] = ["error_pairs.csv"]
    config_echo = {
        "data": str(args.data),
        "calibration": args.calibration,
        "K": args.K,
        "L": args.L,
        "seed": args.seed,
        "max_bins": load_cfg.max_bins,
        "score_column": load_cfg.score_column,
        "outcome_column": load_cfg.outcome_column,
        "train": {f: getattr(train_cfg, f) for f in TrainConfig.__dataclass_fields__},
    }
    report = build_report(
        data, config_echo, decision, diag_raw, summary, fidelities, missing_json, artifacts
    )
    path = write_report(out_dir, report)
    _write_run_meta(out_dir, started, jobs=args.jobs)

    for fm in fidelities:
        auc_txt = "n/a" if fm.outcome_auc_mean is None else f"{fm.outcome_auc_mean:.4f}"
        print(f"{fm.name}: score RMSE {fm.score_rmse_mean:.4f}, outcome AUC {auc_txt}")
    if "verdict" in missing_json:
        print(f"missing-feature test: {missing_json['verdict']}")
    top = summary.ranking[0] if summary.ranking else None
    if top and top[1] > 0:
        print(f"largest discrepancy: {top[0]} ({top[1]:.4f})")
    print(f"report: {path}")
    return 0


def cmd_test_missing(args, stage: _Stage) -> int:
    started = time.time()
    stage.at("load")
    pairs = load_error_pairs_csv(args.data)
    stage.at("missing-test")
    result = correlation_test(
        pairs.mimic_error, pairs.outcome_error, resamples=args.resamples, seed=args.seed
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_json(out_dir / "missing_test.json", result.to_json_dict())
    _write_run_meta(out_dir, started)
    for name, iv in (("pearson", result.pearson), ("spearman", result.spearman), ("kendall", result.kendall)):
        print(f"{name}: {iv.estimate:.4f} [{iv.lower:.4f}, {iv.upper:.4f}]")
    print(f"verdict: {result.verdict}")
    return 0


def cmd_gen_synthetic(args, stage: _Stage) -> int:
    stage.at("generate")
    gen = GENERATORS[args.kind]
    kwargs: dict = {"seed": args.seed}
    if args.rows is not None:
        kwargs["n_rows"] = args.rows
    if args.kind == "hidden-feature" and args.control:
        kwargs["hidden"] = False
    data, truth = gen(**kwargs)
    out = Path(args.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    data.to_csv(out)
    if args.truth_out:
        dump_json(args.truth_out, truth)
    print(f"wrote {data.n_rows} rows to {out}")
    return 0


def _write_run_meta(out_dir: Path, started: float, **extra) -> None:
    meta = {
        "package_version": __version__,
        "started_unix": started,
        "finished_unix": time.time(),
        "duration_seconds": time.time() - started,
    }
    meta.update(extra)
    with open(out_dir / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV with features, score, and outcome")
    p.add_argument("--config", default=None, help="JSON config file (load/train sections)")
    p.add_argument("--score-col", default=None, help="score column name (default: score)")
    p.add_argument("--outcome-col", default=None, help="outcome column name (default: outcome)")
    p.add_argument("--seed", type=int, default=0, help="seed for splits and training")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distillaudit",
        description="Audit black-box risk scores by distilling them into transparent additive models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cal = sub.add_parser("calibrate", help="fit and diagnose the score-to-probability map")
    _add_dataset_flags(p_cal)
    p_cal.add_argument("--calibration", choices=("auto", "on", "off"), default="auto")
    p_cal.set_defaults(func=cmd_calibrate)

    p_audit = sub.add_parser("audit", help="run the full distillation audit")
    _add_dataset_flags(p_audit)
    p_audit.add_argument("--calibration", choices=("auto", "on", "off"), default="auto")
    p_audit.add_argument("--K", type=int, default=5, help="outer folds")
    p_audit.add_argument("--L", type=int, default=5, help="inner bags per fold")
    p_audit.add_argument("--pairs", type=int, default=0, help="pairwise grids to fit")
    p_audit.add_argument("--jobs", type=int, default=1, help="parallel training processes")
    p_audit.set_defaults(func=cmd_audit)

    p_miss = sub.add_parser("test-missing", help="correlation test on a CSV of error pairs")
    p_miss.add_argument("--data", required=True, help="CSV with fold, mimic_abs_error, outcome_abs_error")
    p_miss.add_argument("--resamples", type=int, default=1000)
    p_miss.add_argument("--seed", type=int, default=0)
    p_miss.add_argument("--out", required=True, help="output directory")
    p_miss.set_defaults(func=cmd_test_missing)

    p_gen = sub.add_parser("gen-synthetic", help="write a synthetic audit dataset")
    p_gen.add_argument("--kind", choices=sorted(GENERATORS), required=True)
    p_gen.add_argument("--rows", type=int, default=None, help="rows (default: generator-specific)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--control", action="store_true", help="hidden-feature kind: break the hidden link")
    p_gen.add_argument("--out", required=True, help="output CSV path")
    p_gen.add_argument("--truth-out", default=None, help="optional JSON path for generator constants")
    p_gen.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    stage = _Stage()
    try:
        return args.func(args, stage)
    except ConfigError as exc:
        print(f"error[{stage.name}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error[{stage.name}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"error[{stage.name}]: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except DegenerateStatisticsError as exc:
        print(f"error[{stage.name}]: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except AuditError as exc:
        print(f"error[{stage.name}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
