"""Command-line experiment runner.

Subcommands group the experiments by subject:

    geometry  distance equivalence and ball-volume law (CSV tables)
    heat      conserve / crossnorm / gauss / lower / separation /
              compare / approx
    wave      finite propagation speed and local equality
    ineq      hardy / monotone / sqrt / nash / subelliptic / neumann
    sep       separation dichotomy plus cutoff energies
    report    reload stored reports, recompute pass/fail, summarize

Each run writes one JSON report (plus CSV tables) atomically into the
output directory.  The exit code is 0 iff every check of every
experiment in the invocation passed.  A sweep axis replays the same
experiment over a list of values for one dotted config key, one report
per value, with a summary CSV.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .experiments import EXPERIMENTS, run_experiment
from .reports import load_report, write_csv, write_report

SUBCOMMAND_EXPERIMENTS = {
    "geometry": ["distance", "volume"],
    "heat": ["conserve", "crossnorm", "gauss", "lower", "separation", "compare", "approx", "offdiag"],
    "wave": ["propagation"],
    "ineq": ["hardy", "monotone", "sqrt", "nash", "subelliptic", "neumann"],
    "sep": ["separation", "cutoffs"],
}


def _parse_sweep(raw: str):
    key, _, values = raw.partition("=")
    if not values:
        raise ConfigError(f"sweep axis must look like key=v1,v2,..., got {raw!r}")
    parsed = []
    for item in values.split(","):
        try:
            parsed.append(json.loads(item))
        except json.JSONDecodeError:
            parsed.append(item)
    return key.strip(), parsed


def _base_config(args, experiment: str) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        raw = cfg.to_mapping()
        raw["experiment"] = experiment
    else:
        raw = {"experiment": experiment}
    raw["seed"] = args.seed if args.seed is not None else raw.get("seed", 1234)
    raw["out"] = args.out or raw.get("out", "runs")
    return ExperimentConfig.from_mapping(raw)


def _apply_option_flags(cfg: ExperimentConfig, pairs) -> ExperimentConfig:
    for raw in pairs or []:
        key, _, value = raw.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        cfg = cfg.with_override(f"options.{key.strip()}", parsed)
    return cfg


def _run_one(cfg_mapping: dict):
    cfg = ExperimentConfig.from_mapping(cfg_mapping)
    report = run_experiment(cfg)
    return report


def _execute(configs, out_dir: Path, workers: int, dump_operator: str | None = None):
    reports = []
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_one, [c.to_mapping() for c in configs]))
    else:
        reports = [_run_one(c.to_mapping()) for c in configs]
    for cfg, report in zip(configs, reports):
        stem = cfg.experiment
        if cfg.options.get("sweep_tag") is not None:
            stem = f"{cfg.experiment}_{cfg.options['sweep_tag']}"
        path = write_report(report, out_dir, stem=stem)
        for line in report.summary_lines():
            print(line)
        print(f"report: {path}")
    if dump_operator:
        _dump_operator(configs[0], dump_operator)
    return reports


def _dump_operator(cfg: ExperimentConfig, path: str):
    """Write the configured operator in matrix-market sparse text form."""
    from scipy.io import mmwrite

    from .assembly import NEUMANN_BOX, assemble

    if not cfg.grid or not cfg.params:
        raise ConfigError("--dump-operator needs both a grid and params block")
    op = assemble(cfg.make_grid(), cfg.coefficient_field(), bc=NEUMANN_BOX)
    mmwrite(path, op.matrix)
    print(f"operator written: {path}")


def _add_common(parser):
    parser.add_argument("--config", help="YAML experiment config")
    parser.add_argument("--out", help="output directory (default runs/)")
    parser.add_argument("--seed", type=int, default=None, help="root seed")
    parser.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    parser.add_argument(
        "--sweep", help="axis for a parameter sweep, e.g. params.d1=0.25,0.5,0.75"
    )
    parser.add_argument(
        "--set",
        dest="options",
        action="append",
        metavar="KEY=VALUE",
        help="override an experiment option (repeatable)",
    )
    parser.add_argument("--dump-operator", help="write the assembled operator (matrix market)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grusinlab",
        description="numerical experiments for degenerate elliptic operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiments in SUBCOMMAND_EXPERIMENTS.items():
        p = sub.add_parser(name, help=f"experiments: {', '.join(experiments)}")
        p.add_argument(
            "--experiment",
            choices=experiments,
            default=None,
            help="run a single experiment of this group (default: all)",
        )
        if name == "heat":
            p.add_argument("--params", help="params as n,m,d1,d1p,d2,d2p")
            p.add_argument("--grid", help="grid as L1xL2,N1xN2 (e.g. 6x6,256x256)")
            p.add_argument("--times", help="comma-separated times")
        if name == "wave":
            p.add_argument("--time", type=float, default=None, help="propagation time")
            p.add_argument("--slack", type=float, default=None, help="metric slack factor")
        if name == "ineq":
            p.add_argument(
                "--suite",
                choices=experiments,
                default=None,
                help="alias of --experiment",
            )
            p.add_argument("--trials", type=int, default=None)
        _add_common(p)
    rp = sub.add_parser("report", help="summarize stored reports")
    rp.add_argument("--out", default="runs", help="directory of stored reports")

    args = parser.parse_args(argv)

    if args.command == "report":
        return _report_command(Path(args.out))

    experiments = SUBCOMMAND_EXPERIMENTS[args.command]
    chosen = getattr(args, "experiment", None) or getattr(args, "suite", None)
    names = [chosen] if chosen else experiments

    configs = []
    for name in names:
        cfg = _base_config(args, name)
        cfg = _apply_option_flags(cfg, args.options)
        cfg = _inline_flags(args, cfg)
        configs.append(cfg)

    if args.sweep:
        key, values = _parse_sweep(args.sweep)
        swept = []
        for cfg in configs:
            for value in values:
                item = cfg.with_override(key, value)
                item = item.with_override("options.sweep_tag", f"{key.split('.')[-1]}{value}")
                swept.append(item)
        configs = swept

    out_dir = Path(args.out or "runs")
    failures = []
    try:
        reports = _execute(configs, out_dir, args.workers, args.dump_operator)
    except Exception as exc:  # propagate context, fail the invocation
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.sweep:
        _write_sweep_summary(out_dir, configs, reports)
    failures = [r for r in reports if not r.passed]
    return 0 if not failures else 1


def _inline_flags(args, cfg: ExperimentConfig) -> ExperimentConfig:
    raw = cfg.to_mapping()
    if getattr(args, "params", None):
        vals = [float(v) for v in args.params.split(",")]
        if len(vals) != 6:
            raise ConfigError("--params expects n,m,d1,d1p,d2,d2p")
        raw["params"] = {
            "n": int(vals[0]), "m": int(vals[1]), "d1": vals[2], "d1p": vals[3],
            "d2": vals[4], "d2p": vals[5],
        }
    if getattr(args, "grid", None):
        widths, _, counts = args.grid.partition(",")
        raw["grid"] = {
            "half_widths": [float(v) for v in widths.split("x")],
            "cells": [int(v) for v in counts.split("x")],
        }
    cfg = ExperimentConfig.from_mapping(raw)
    if getattr(args, "times", None):
        cfg = cfg.with_override("options.times", [float(v) for v in args.times.split(",")])
    if getattr(args, "time", None) is not None:
        cfg = cfg.with_override("options.t", args.time)
    if getattr(args, "slack", None) is not None:
        cfg = cfg.with_override("options.slack", args.slack)
    if getattr(args, "trials", None) is not None:
        cfg = cfg.with_override("options.trials", args.trials)
    return cfg


def _write_sweep_summary(out_dir: Path, configs, reports):
    rows = []
    for cfg, report in zip(configs, reports):
        rows.append(
            [
                cfg.experiment,
                cfg.options.get("sweep_tag", ""),
                "pass" if report.passed else "fail",
                sum(1 for c in report.checks if not c.passed),
                report.meta.get("wall_clock_s", ""),
            ]
        )
    write_csv(out_dir / "sweep_summary.csv", ["experiment", "point", "status", "failed_checks", "wall_clock_s"], rows)
    print(f"sweep summary: {out_dir / 'sweep_summary.csv'}")


def _report_command(out_dir: Path) -> int:
    paths = sorted(out_dir.glob("*.json"))
    if not paths:
        print(f"no reports under {out_dir}")
        return 1
    all_ok = True
    for path in paths:
        report = load_report(path)
        recomputed = report.recompute_passed()
        stored = report.passed
        status = "pass" if recomputed else "FAIL"
        marker = "" if recomputed == stored else " (stored flag disagrees!)"
        print(f"{path.name}: {status}{marker} ({len(report.checks)} checks)")
        all_ok &= recomputed
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
