"""Repeated K-fold cross-validated grid search over the subpopulation size.

Predictions for every (repetition, fold, index patient, grid point) are
computed once and shared by any number of loss functions, so sweeping
several mixture weights costs no extra model fits.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .data import derive_seed, kfold_partition
from .glm import FitConfig
from .metrics import MEASURES, full_report, mixture_loss
from .model import FitCounts, personalized_predictions, size_from_proportion
from .similarity import WeightScheme

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.02, 0.05, 0.078, 0.1, 0.156, 0.2, 0.3, 0.4, 0.5, 0.642, 0.75, 0.871, 1.0)


@dataclass(frozen=True)
class TuningConfig:
    """Grid search settings.

    `m_grid` holds subpopulation sizes as proportions of the training fold;
    a proportion becomes ``ceiling(proportion * n_train_fold)`` patients.
    Grid points below ``max(min_subpop, p + 2)`` are infeasible.
    """

    m_grid: tuple = DEFAULT_GRID
    alpha: float = 0.5
    K: int = 10
    v: int = 20
    weight_scheme: WeightScheme = WeightScheme.UNIFORM
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)
    min_subpop: int = 20
    min_events: int = 5
    standardize: bool = True
    weight_basis: str = "similarity"

    def __post_init__(self):
        grid = tuple(float(g) for g in self.m_grid)
        if not grid:
            raise ValueError("m_grid must not be empty")
        if any(not 0 < g <= 1 for g in grid):
            raise ValueError("m_grid proportions must lie in (0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("m_grid must be strictly increasing")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.K < 2 or self.v < 1:
            raise ValueError("need K >= 2 and v >= 1")
        object.__setattr__(self, "m_grid", grid)
        object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))
        if self.weight_basis not in ("rank", "similarity"):
            raise ValueError(f"unknown weight basis {self.weight_basis!r}")


@dataclass(frozen=True)
class LossPoint:
    M: int
    proportion: float
    mean_loss: float
    se_loss: float
    n_evaluations: int
    feasible: bool


@dataclass(frozen=True)
class TuningResult:
    alpha: float
    loss_curve: tuple
    optimal_m: int
    p_optimal: float
    n_train: int
    skipped: int
    nonconverged: int

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "optimal_m": self.optimal_m,
            "p_optimal": self.p_optimal,
            "n_train": self.n_train,
            "skipped": self.skipped,
            "nonconverged": self.nonconverged,
            "loss_curve": [vars(pt) for pt in self.loss_curve],
        }


@dataclass
class FoldPredictions:
    """Out-of-fold predictions for one (repetition, fold) pair."""

    repetition: int
    fold: int
    test_index: np.ndarray
    y: np.ndarray
    sizes: np.ndarray  # per grid point; 0 where infeasible
    preds: np.ndarray  # (n_test, n_grid), NaN where infeasible
    counts: FitCounts

    def feasible(self, g):
        return self.sizes[g] > 0


def minimum_subpopulation(cfg, p):
    return max(cfg.min_subpop, p + 2)


def fold_sizes(n_train, cfg, p):
    floor = minimum_subpopulation(cfg, p)
    sizes = [size_from_proportion(g, n_train) for g in cfg.m_grid]
    return np.array([m if m >= floor else 0 for m in sizes])


def _fold_task(args):
    X, y, test, sizes, cfg, rep, k = args
    train = np.setdiff1d(np.arange(len(y)), test, assume_unique=True)
    with threadpool_limits(limits=1):
        preds, counts = personalized_predictions(
            X[train],
            y[train],
            X[test],
            sizes,
            cfg.weight_scheme,
            cfg.fit,
            min_events=cfg.min_events,
            standardize=cfg.standardize,
            weight_basis=cfg.weight_basis,
        )
    return FoldPredictions(rep, k, test, y[test].astype(float), np.asarray(sizes), preds, counts)


def repetition_folds(n, cfg):
    """Fold layouts for each of the ``v`` repetitions, seeded from ``cfg.seed``."""
    return [kfold_partition(n, cfg.K, derive_seed(cfg.seed, rep)) for rep in range(cfg.v)]


def cross_validated_predictions(trte, cfg, workers=1):
    """Out-of-fold personalized predictions for every grid point.

    Tasks are independent per (repetition, fold) and results are returned
    in task order, so the output does not depend on `workers`.
    """
    if cfg.v * cfg.K < 200:
        warnings.warn(
            f"v*K = {cfg.v * cfg.K} repeated folds is below the recommended 200", stacklevel=2
        )
    X, y = trte.features, trte.outcomes
    tasks = []
    for rep, folds in enumerate(repetition_folds(trte.n, cfg)):
        for k, test in enumerate(folds):
            sizes = fold_sizes(trte.n - len(test), cfg, trte.p)
            tasks.append((X, y, test, sizes, cfg, rep, k))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fold_task, tasks))
    else:
        results = [_fold_task(t) for t in tasks]
    return results


def reference_train_size(n, K):
    """Size of the smallest training fold, used to express M as a proportion."""
    return n - math.ceil(n / K)


def _fold_losses(fold_preds, loss, g):
    out = []
    for fp in fold_preds:
        if not fp.feasible(g):
            return None
        out.append(loss(fp.y, fp.preds[:, g]))
    return np.array(out)


def summarize(fold_preds, cfg, n, loss=None, alpha=None):
    """Reduce cross-validated predictions to a :class:`TuningResult`.

    `loss` maps ``(y, p)`` to a number; it defaults to the mixture loss
    at `alpha` (or ``cfg.alpha``). Per-fold losses are averaged over all
    ``v * K`` folds in fixed order.
    """
    alpha = cfg.alpha if alpha is None else alpha
    if loss is None:

        def loss(y, p):
            return mixture_loss(y, p, alpha)

    n_train = reference_train_size(n, cfg.K)
    curve = []
    for g, prop in enumerate(cfg.m_grid):
        m = size_from_proportion(prop, n_train)
        losses = _fold_losses(fold_preds, loss, g)
        if losses is None:
            curve.append(LossPoint(m, prop, math.nan, math.nan, 0, False))
            continue
        se = float(losses.std(ddof=1) / np.sqrt(len(losses))) if len(losses) > 1 else 0.0
        curve.append(LossPoint(m, prop, float(losses.mean()), se, len(losses), True))
    feasible = [pt for pt in curve if pt.feasible]
    if not feasible:
        raise ValueError("every grid point is infeasible for this training set")
    # first minimum in increasing-M order, so ties go to the smaller M
    best = min(feasible, key=lambda pt: pt.mean_loss)
    counts = FitCounts()
    for fp in fold_preds:
        counts += fp.counts
    if counts.nonconverged:
        log.info("%d subpopulation fits did not converge", counts.nonconverged)
    return TuningResult(
        alpha=float(alpha),
        loss_curve=tuple(curve),
        optimal_m=best.M,
        p_optimal=best.M / n_train,
        n_train=n_train,
        skipped=counts.fallback,
        nonconverged=counts.nonconverged,
    )


def tune_subpopulation_size(trte, cfg, loss=None, workers=1):
    """Pick the grid proportion with the smallest repeated-CV mean loss."""
    fold_preds = cross_validated_predictions(trte, cfg, workers)
    return summarize(fold_preds, cfg, trte.n, loss=loss)


def tune_alphas(trte, cfg, alphas, workers=1):
    """Tune for several mixture weights from one shared set of predictions."""
    fold_preds = cross_validated_predictions(trte, cfg, workers)
    return {float(a): summarize(fold_preds, cfg, trte.n, alpha=a) for a in alphas}


@dataclass(frozen=True)
class CandidateEvaluation:
    M: int
    feasible: bool
    mean_loss: float
    fold_losses: tuple
    skipped: int


def evaluate_candidate(trte, folds, M, cfg, loss=None):
    """Mean pooled loss over the given folds for one subpopulation size `M`.

    Each test fold is pooled into one prediction set before the loss is
    taken; the fold losses are then averaged.
    """
    if loss is None:

        def loss(y, p):
            return mixture_loss(y, p, cfg.alpha)

    smallest = min(trte.n - len(f) for f in folds)
    if M < minimum_subpopulation(cfg, trte.p) or M > smallest:
        return CandidateEvaluation(M, False, math.nan, (), 0)
    losses = []
    skipped = 0
    for k, test in enumerate(folds):
        fp = _fold_task((trte.features, trte.outcomes, np.asarray(test), [M], cfg, 0, k))
        losses.append(loss(fp.y, fp.preds[:, 0]))
        skipped += fp.counts.fallback
    return CandidateEvaluation(M, True, float(np.mean(losses)), tuple(losses), skipped)


def m_sweep(trte, cfg, workers=1, ici_span=0.75, slope_method="logistic", fold_preds=None):
    """All performance measures as a function of subpopulation size.

    For each repetition the out-of-fold predictions of every patient are
    pooled into one prediction set per grid point; measures are averaged
    over repetitions (undefined values skipped).

    Returns
    -------
    list of dict
        One row per (grid point, measure) with keys ``M``, ``proportion``,
        ``measure``, ``value``, ``n``.
    """
    if fold_preds is None:
        fold_preds = cross_validated_predictions(trte, cfg, workers)
    n_train = reference_train_size(trte.n, cfg.K)
    rows = []
    for g, prop in enumerate(cfg.m_grid):
        m = size_from_proportion(prop, n_train)
        reports = []
        losses = []
        for rep in range(cfg.v):
            parts = [fp for fp in fold_preds if fp.repetition == rep]
            if not all(fp.feasible(g) for fp in parts):
                continue
            y = np.concatenate([fp.y for fp in parts])
            p = np.concatenate([fp.preds[:, g] for fp in parts])
            reports.append(full_report(y, p, ici_span=ici_span, slope_method=slope_method))
            losses.append(np.mean([mixture_loss(fp.y, fp.preds[:, g], cfg.alpha) for fp in parts]))
        values = {name: [] for name in MEASURES}
        for r in reports:
            for name in values:
                v = r.get(name)
                if v is not None:
                    values[name].append(v)
        values["loss"] = losses
        for name, vals in values.items():
            rows.append(
                {
                    "M": m,
                    "proportion": prop,
                    "measure": name,
                    "value": float(np.mean(vals)) if vals else math.nan,
                    "n": len(vals),
                }
            )
    return rows
