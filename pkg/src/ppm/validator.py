"""External validation on a holdout sample: bootstrap replicates and BCa intervals."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm
from threadpoolctl import threadpool_limits

from .data import derive_seed
from .glm import FitConfig
from .metrics import MEASURES, PredictionSet, full_report, measure_value
from .model import personalized_predictions, size_from_proportion
from .similarity import WeightScheme

log = logging.getLogger(__name__)

BCA = "BCa"
PERCENTILE = "percentile-fallback"


class ValidationUnstableError(RuntimeError):
    pass


@dataclass(frozen=True)
class ValidationConfig:
    B: int = 1000
    p_optimal: float = 1.0
    inner_split: float = 0.8
    weight_scheme: WeightScheme = WeightScheme.UNIFORM
    level: float = 0.95
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)
    min_events: int = 5
    standardize: bool = True
    weight_basis: str = "similarity"
    max_retries: int = 10
    ici_span: float = 0.75
    slope_method: str = "logistic"

    def __post_init__(self):
        if self.B < 2:
            raise ValueError("B must be at least 2")
        if not 0 < self.p_optimal <= 1:
            raise ValueError("p_optimal must lie in (0, 1]")
        if not 0 < self.inner_split < 1:
            raise ValueError("inner_split must lie in (0, 1)")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))
        if self.weight_basis not in ("rank", "similarity"):
            raise ValueError(f"unknown weight basis {self.weight_basis!r}")


@dataclass(frozen=True)
class ConfidenceInterval:
    point: float
    se: float
    lower: float
    upper: float
    method: str


def _quantile(values, q):
    # linear interpolation of order statistics ("type 7")
    return float(np.quantile(values, q, method="linear"))


def bca_interval(replicates, jackknife_values, point, level=0.95):
    """Bias-corrected and accelerated bootstrap interval.

    Parameters
    ----------
    replicates : sequence of float
        Bootstrap estimates of the statistic.
    jackknife_values : sequence of float
        Leave-one-out estimates, used for the acceleration.
    point : float
        Estimate on the original sample; drives the bias correction.
    level : float
        Two-sided coverage, e.g. 0.95.

    Returns
    -------
    ConfidenceInterval
        ``method`` is ``"percentile-fallback"`` when the bias correction is
        infinite or all replicates coincide.
    """
    reps = np.asarray(replicates, dtype=float)
    reps = reps[np.isfinite(reps)]
    if len(reps) == 0:
        raise ValueError("no finite bootstrap replicates")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    se = float(reps.std(ddof=1)) if len(reps) > 1 else 0.0
    if np.all(reps == reps[0]):
        return ConfidenceInterval(float(point), se, float(point), float(point), PERCENTILE)

    tail = (1.0 - level) / 2.0
    percentile = (_quantile(reps, tail), _quantile(reps, 1.0 - tail))
    B = len(reps)
    frac = (np.sum(reps < point) + 0.5 * np.sum(reps == point)) / B
    if frac <= 0 or frac >= 1:
        warnings.warn("point estimate outside the bootstrap distribution; using percentile interval")
        return ConfidenceInterval(float(point), se, *percentile, PERCENTILE)
    z0 = norm.ppf(frac)

    jack = np.asarray(jackknife_values, dtype=float)
    jack = jack[np.isfinite(jack)]
    a = 0.0
    if len(jack) > 1:
        d = jack.mean() - jack
        ss = np.sum(d**2)
        if ss > 0:
            a = float(np.sum(d**3) / (6.0 * ss**1.5))

    ends = []
    for q in (tail, 1.0 - tail):
        z = norm.ppf(q)
        denom = 1.0 - a * (z0 + z)
        if denom <= 0:
            warnings.warn("acceleration too large for BCa; using percentile interval")
            return ConfidenceInterval(float(point), se, *percentile, PERCENTILE)
        adjusted = z0 + (z0 + z) / denom
        # no adjustment: reuse q itself, since cdf(ppf(q)) need not round-trip
        ends.append(q if adjusted == z else norm.cdf(adjusted))
    lower, upper = sorted(_quantile(reps, q) for q in ends)
    return ConfidenceInterval(float(point), se, lower, upper, BCA)


def stratified_split(y, fraction, rng):
    """Split row positions into (train, test), stratified by outcome.

    Each class contributes ``round(fraction * n_class)`` rows to the
    training part.
    """
    y = np.asarray(y)
    train, test = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        k = int(math.floor(fraction * len(idx) + 0.5))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _viable(y_train, y_test):
    return len(np.unique(y_train)) == 2 and len(np.unique(y_test)) == 2


def _inner_predictions(X, y, train, test, cfg):
    n_train = len(train)
    m = size_from_proportion(cfg.p_optimal, n_train)
    preds, _ = personalized_predictions(
        X[train],
        y[train],
        X[test],
        [m],
        cfg.weight_scheme,
        cfg.fit,
        min_events=cfg.min_events,
        standardize=cfg.standardize,
        weight_basis=cfg.weight_basis,
    )
    return PredictionSet(y[test].astype(float), preds[:, 0])


def run_bootstrap_replicate(holdout, cfg, replicate_seed):
    """One bootstrap replicate of the holdout pipeline.

    Draws ``|holdout|`` rows with replacement, splits them into inner
    training and test parts, and predicts every inner test patient from
    its ``ceiling(n_train * p_optimal)`` most similar inner training
    patients.

    Returns
    -------
    PerformanceReport or None
        None when no resample with both classes in both parts was found
        within ``cfg.max_retries`` attempts.
    """
    rng = np.random.default_rng(replicate_seed)
    X, y = holdout.features, holdout.outcomes
    n = holdout.n
    for _ in range(cfg.max_retries):
        rows = rng.integers(0, n, n)
        train, test = stratified_split(y[rows], cfg.inner_split, rng)
        if _viable(y[rows][train], y[rows][test]):
            ps = _inner_predictions(X[rows], y[rows], train, test, cfg)
            return full_report(ps, ici_span=cfg.ici_span, slope_method=cfg.slope_method)
    return None


def reference_run(holdout, cfg):
    """Predictions on the holdout itself (no resampling) with one seeded inner split."""
    rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    y = holdout.outcomes
    for _ in range(cfg.max_retries):
        train, test = stratified_split(y, cfg.inner_split, rng)
        if _viable(y[train], y[test]):
            return _inner_predictions(holdout.features, y, train, test, cfg)
    raise ValidationUnstableError("holdout too small to hold both classes in both inner parts")


def jackknife(ps, measure, ici_span=0.75, slope_method="logistic"):
    """Leave-one-pair-out values of `measure` on fixed predictions (NaN where undefined)."""
    n = len(ps)
    out = np.empty(n)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        v = measure_value(measure, ps.y[keep], ps.p[keep], ici_span, slope_method)
        out[i] = math.nan if v is None else v
        keep[i] = True
    return out


@dataclass(frozen=True)
class MeasureSummary:
    point: float | None
    reference: float | None
    se: float | None
    lower: float | None
    upper: float | None
    method: str | None
    n_failed_replicates: int


@dataclass(frozen=True)
class ValidationReport:
    p_optimal: float
    B: int
    failed_replicates: int
    measures: dict
    replicates: dict  # measure -> list of values (None where undefined/failed)

    def as_dict(self):
        return {
            "p_optimal": self.p_optimal,
            "B": self.B,
            "failed_replicates": self.failed_replicates,
            "measures": {k: asdict(v) for k, v in self.measures.items()},
        }


def _replicate_task(args):
    holdout, cfg, seed = args
    with threadpool_limits(limits=1):
        return run_bootstrap_replicate(holdout, cfg, seed)


def external_validate(holdout, cfg, workers=1):
    """Bootstrap validation of the personalized model at ``cfg.p_optimal``.

    The reported point estimate is the mean over replicates; ``reference``
    is the value from one un-resampled run of the holdout, which also
    anchors the BCa bias correction. The acceleration comes from
    jackknifing patients of that reference run with the models held fixed.
    """
    seeds = [derive_seed(cfg.seed, 2, b) for b in range(cfg.B)]
    tasks = [(holdout, cfg, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_replicate_task, tasks, chunksize=max(1, cfg.B // (4 * workers))))
    else:
        reports = [_replicate_task(t) for t in tasks]
    failed = sum(r is None for r in reports)
    if failed > 0.2 * cfg.B:
        raise ValidationUnstableError(
            f"validation unstable: {failed} of {cfg.B} bootstrap replicates failed"
        )

    with threadpool_limits(limits=1):
        ref = reference_run(holdout, cfg)
        ref_report = full_report(ref, ici_span=cfg.ici_span, slope_method=cfg.slope_method)

        measures = {}
        replicates = {}
        for name in MEASURES:
            vals = [None if r is None else r.get(name) for r in reports]
            replicates[name] = vals
            finite = np.array([v for v in vals if v is not None], dtype=float)
            n_failed = cfg.B - len(finite)
            reference = ref_report.get(name)
            if len(finite) == 0:
                measures[name] = MeasureSummary(None, reference, None, None, None, None, n_failed)
                continue
            mean = float(finite.mean())
            jack = jackknife(ref, name, cfg.ici_span, cfg.slope_method)
            anchor = reference if reference is not None else mean
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ci = bca_interval(finite, jack, anchor, cfg.level)
            measures[name] = MeasureSummary(
                mean, reference, ci.se, ci.lower, ci.upper, ci.method, n_failed
            )
    return ValidationReport(cfg.p_optimal, cfg.B, failed, measures, replicates)
