"""Command-line entry point: ``ppm <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .data import DataError, load_csv, write_csv
from .experiment import (
    emit_m_sweep,
    load_dataset,
    run_experiment,
    write_experiment,
    write_json,
    write_loss_curve,
    write_replicates,
)
from .metrics import full_report
from .simgen import generate_dataset
from .tuner import tune_alphas
from .validator import external_validate

log = logging.getLogger("ppm")


def _dataset(args, cfg):
    if args.data:
        return load_csv(args.data, args.outcome or cfg.outcome_column)
    return load_dataset(cfg)


def cmd_simulate(args, cfg):
    sim = cfg.simulation
    if args.n is not None:
        sim = replace(sim, n=args.n)
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    ds = generate_dataset(sim)
    write_csv(ds, args.out, outcome_column="y")
    log.info("wrote %d rows, prevalence %.3f", ds.n, ds.outcomes.mean())


def cmd_tune(args, cfg):
    ds = _dataset(args, cfg)
    results = tune_alphas(ds, cfg.tuning, cfg.alphas, args.workers or cfg.workers)
    out = Path(args.out)
    write_json({"results": [r.as_dict() for r in results.values()]}, out)
    for a, r in results.items():
        name = "loss_curve.csv" if len(results) == 1 else f"loss_curve_a{a:g}.csv"
        write_loss_curve(r, out.with_name(name))
        log.info("alpha %g: optimal M %d (proportion %.4f), %d fallbacks", a, r.optimal_m, r.p_optimal, r.skipped)


def cmd_validate(args, cfg):
    ds = _dataset(args, cfg)
    vcfg = replace(cfg.validation, p_optimal=args.p_optimal)
    if args.B is not None:
        vcfg = replace(vcfg, B=args.B)
    report = external_validate(ds, vcfg, args.workers or cfg.workers)
    out = Path(args.out)
    write_json(report.as_dict(), out)
    write_replicates(report, out.with_name("replicates.csv"))
    log.info("%d failed replicates", report.failed_replicates)


def cmd_sweep_m(args, cfg):
    ds = _dataset(args, cfg)
    emit_m_sweep(
        ds,
        cfg.tuning,
        args.out,
        args.workers or cfg.workers,
        ici_span=cfg.validation.ici_span,
        slope_method=cfg.validation.slope_method,
    )


def cmd_experiment(args, cfg):
    out = args.out or cfg.output_dir
    report = run_experiment(cfg, workers=args.workers or cfg.workers)
    write_experiment(report, out)
    failed = sum(not c.ok for c in report.cells)
    log.info("%d cells, %d failed; reports in %s", len(report.cells), failed, out)


def cmd_metrics(args, cfg):
    with open(args.pairs, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"y", "p"} <= set(rows[0]):
        raise DataError("pairs file needs columns y and p")
    try:
        y = np.array([float(r["y"]) for r in rows])
        p = np.array([float(r["p"]) for r in rows])
    except ValueError as exc:
        raise DataError(f"non-numeric value in pairs file: {exc}") from None
    report = full_report(y, p, ici_span=cfg.validation.ici_span, slope_method=cfg.validation.slope_method)
    json.dump(report.as_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="ppm", description="Personalized predictive models")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="TOML config file (defaults apply when omitted)")
        p.set_defaults(func=func)
        return p

    def data_args(p):
        p.add_argument("--data", help="CSV file; simulated from the config when omitted")
        p.add_argument("--outcome", help="outcome column name")
        p.add_argument("--workers", type=int, help="worker processes")

    p = add("simulate", cmd_simulate, "write a simulated cohort as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)

    p = add("tune", cmd_tune, "tune the subpopulation size by repeated cross-validation")
    data_args(p)
    p.add_argument("--out", required=True, help="JSON report; loss curves go beside it")

    p = add("validate", cmd_validate, "bootstrap validation on a holdout set")
    data_args(p)
    p.add_argument("--p-optimal", type=float, required=True)
    p.add_argument("--B", type=int, help="bootstrap replicates")
    p.add_argument("--out", default="validation_report.json")

    p = add("sweep-m", cmd_sweep_m, "all measures as a function of subpopulation size")
    data_args(p)
    p.add_argument("--out", required=True, help="tidy CSV")

    p = add("experiment", cmd_experiment, "full experiment over Z holdout repetitions")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)

    p = add("metrics", cmd_metrics, "all measures for a CSV of (y, p) pairs")
    p.add_argument("--pairs", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = parse_config(args.config)
        args.func(args, cfg)
    except (ConfigError, DataError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"ppm: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
