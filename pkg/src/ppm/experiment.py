"""Outer experiment loop and report emission.

Each of ``Z`` repetitions draws its own holdout, tunes the subpopulation
size for every mixture weight from one shared set of cross-validated
predictions, and validates each resulting proportion on the holdout.
All seeds derive from the master seed, so reports do not depend on the
number of workers.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import SplitPlan, derive_seed, load_csv, split_holdout
from .metrics import MEASURES
from .simgen import generate_dataset
from .tuner import m_sweep, tune_alphas
from .validator import external_validate

log = logging.getLogger(__name__)

# purpose keys for derive_seed
_SPLIT, _TUNE, _VALIDATE = 1, 2, 3

LOSS_CURVE_COLUMNS = ("M", "proportion", "mean_loss", "se_loss", "feasible")
SWEEP_COLUMNS = ("M", "proportion", "measure", "value", "n")
REPLICATE_COLUMNS = ("replicate", "measure", "value")
SUMMARY_FIELDS = ("point", "se", "lower", "upper")


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (repetition, alpha) cell; `error` is set when it failed."""

    repetition: int
    alpha: float
    tuning: object = None
    validation: object = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple
    alphas: tuple
    Z: int
    seed: int

    def alpha_sweep(self):
        """Rows of (repetition, alpha, p_optimal, optimal_m) for successful tunings."""
        return [
            {
                "repetition": c.repetition,
                "alpha": c.alpha,
                "p_optimal": c.tuning.p_optimal,
                "optimal_m": c.tuning.optimal_m,
            }
            for c in self.cells
            if c.tuning is not None
        ]

    def summary_table(self):
        """Per alpha: mean proportion and, per measure, mean point, SE and interval.

        Averages run over the repetitions whose cell succeeded.
        """
        rows = []
        for a in self.alphas:
            done = [c for c in self.cells if c.alpha == a and c.ok]
            row = {"alpha": a, "n_repetitions": len(done)}
            row["proportion"] = _mean([c.tuning.p_optimal for c in done])
            for name in MEASURES:
                for f in SUMMARY_FIELDS:
                    row[f"{name}_{f}"] = _mean(
                        [getattr(c.validation.measures[name], f) for c in done]
                    )
            rows.append(row)
        return rows

    def as_dict(self):
        return {
            "seed": self.seed,
            "Z": self.Z,
            "alphas": list(self.alphas),
            "cells": [_cell_dict(c) for c in self.cells],
            "alpha_sweep": self.alpha_sweep(),
            "summary": self.summary_table(),
        }


def _mean(values):
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.mean(vals)) if vals else None


def _cell_dict(c):
    return {
        "repetition": c.repetition,
        "alpha": c.alpha,
        "error": c.error,
        "tuning": None if c.tuning is None else c.tuning.as_dict(),
        "validation": None if c.validation is None else c.validation.as_dict(),
    }


def load_dataset(cfg):
    """The configured CSV, or a simulated cohort when no path is given."""
    if cfg.data_path is not None:
        return load_csv(cfg.data_path, cfg.outcome_column)
    return generate_dataset(cfg.simulation)


def _repetition(ds, cfg, z, workers):
    plan = SplitPlan(
        cfg.split.holdout_fraction, cfg.tuning.K, cfg.tuning.v, derive_seed(cfg.seed, _SPLIT, z)
    )
    tcfg = replace(cfg.tuning, seed=derive_seed(cfg.seed, _TUNE, z))
    vcfg = replace(cfg.validation, seed=derive_seed(cfg.seed, _VALIDATE, z))
    try:
        trte, holdout = split_holdout(ds, plan)
        tunings = tune_alphas(trte, tcfg, cfg.alphas, workers)
    except (ValueError, RuntimeError) as exc:
        log.warning("repetition %d: tuning failed: %s", z, exc)
        return [CellResult(z, a, error=f"tuning: {exc}") for a in cfg.alphas]

    cells = []
    validated = {}  # p_optimal -> report; alphas sharing a proportion share a validation
    for a in cfg.alphas:
        tuning = tunings[a]
        p_opt = tuning.p_optimal
        try:
            if p_opt not in validated:
                validated[p_opt] = external_validate(
                    holdout, replace(vcfg, p_optimal=p_opt), workers
                )
            cells.append(CellResult(z, a, tuning, validated[p_opt]))
        except (ValueError, RuntimeError) as exc:
            log.warning("repetition %d, alpha %g: validation failed: %s", z, a, exc)
            cells.append(CellResult(z, a, tuning, error=f"validation: {exc}"))
    return cells


def run_experiment(cfg, workers=None, dataset=None):
    """Run all ``cfg.Z`` repetitions.

    Parameters
    ----------
    cfg : ExperimentConfig
    workers : int, optional
        Process count; defaults to ``cfg.workers``. Does not affect results.
    dataset : Dataset, optional
        Overrides the configured data source.

    Raises
    ------
    RuntimeError
        If every (repetition, alpha) cell failed.
    """
    workers = cfg.workers if workers is None else workers
    ds = load_dataset(cfg) if dataset is None else dataset
    cells = []
    for z in range(cfg.Z):
        log.info("repetition %d of %d", z + 1, cfg.Z)
        cells.extend(_repetition(ds, cfg, z, workers))
    if not any(c.ok for c in cells):
        raise RuntimeError("every experiment cell failed: " + "; ".join(c.error for c in cells))
    return ExperimentReport(tuple(cells), tuple(cfg.alphas), cfg.Z, cfg.seed)


def _clean(obj):
    # NaN/inf are not valid JSON
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_rows(rows, columns, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in columns})


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def loss_curve_rows(tuning):
    return [vars(pt) for pt in tuning.loss_curve]


def write_loss_curve(tuning, path):
    write_rows(loss_curve_rows(tuning), LOSS_CURVE_COLUMNS, path)


def write_replicates(validation, path):
    """Long format: one row per (replicate, measure); empty value where undefined."""
    rows = [
        {"replicate": b, "measure": name, "value": validation.replicates[name][b]}
        for b in range(validation.B)
        for name in MEASURES
    ]
    write_rows(rows, REPLICATE_COLUMNS, path)


def _tag(c):
    return f"r{c.repetition}_a{c.alpha:g}"


def write_experiment(report, out_dir):
    """Write the experiment report and per-cell files into `out_dir`.

    Files: ``report.json``, ``summary.csv``, ``alpha_sweep.csv`` and, per
    (repetition, alpha) cell, ``loss_curve_<tag>.csv``,
    ``validation_<tag>.json`` and ``replicates_<tag>.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(report.as_dict(), out / "report.json")
    table = report.summary_table()
    table_cols = ["alpha", "n_repetitions", "proportion"] + [
        f"{m}_{f}" for m in MEASURES for f in SUMMARY_FIELDS
    ]
    write_rows(table, table_cols, out / "summary.csv")
    write_rows(
        report.alpha_sweep(), ("repetition", "alpha", "p_optimal", "optimal_m"), out / "alpha_sweep.csv"
    )
    for c in report.cells:
        if c.tuning is not None:
            write_loss_curve(c.tuning, out / f"loss_curve_{_tag(c)}.csv")
        if c.validation is not None:
            write_json(c.validation.as_dict(), out / f"validation_{_tag(c)}.json")
            write_replicates(c.validation, out / f"replicates_{_tag(c)}.csv")
    return out


def emit_m_sweep(trte, cfg, path, workers=1, ici_span=0.75, slope_method="logistic"):
    """Write a tidy CSV with one row per (M, measure) and return the rows."""
    rows = m_sweep(trte, cfg, workers, ici_span=ici_span, slope_method=slope_method)
    write_rows(rows, SWEEP_COLUMNS, path)
    return rows
