"""Performance measures for binary predictions and the calibration/refinement mixture loss.

Every function takes observed outcomes ``y`` (0/1) and predicted
probabilities ``p`` of equal length.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import logit
from scipy.stats import rankdata

from .glm import FitConfig, fit_weighted_logistic

LOGIT_CLIP = 1e-6
MEASURES = ("auroc", "auprc", "citl", "citl_mean", "calibration_slope", "ici", "brier")


class UndefinedMetricError(ValueError):
    """The measure does not exist for this input (e.g. a single outcome class)."""


@dataclass(frozen=True)
class PredictionSet:
    """Paired outcomes and predicted probabilities."""

    y: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        y, p = _check(self.y, self.p)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "p", p)

    def __len__(self):
        return len(self.y)


def _check(y, p):
    if isinstance(y, PredictionSet):
        return y.y, y.p
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if y.ndim != 1 or y.shape != p.shape:
        raise ValueError("y and p must be one-dimensional and of equal length")
    if y.size == 0:
        raise ValueError("empty prediction set")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("outcomes must be 0 or 1")
    if not np.all((p >= 0) & (p <= 1)):
        raise ValueError("predicted probabilities must lie in [0, 1]")
    return y, p


def brier_score(y, p=None):
    y, p = _check(y, p)
    return float(np.mean((y - p) ** 2))


def brier_decomposition(y, p=None):
    r"""Split the Brier score into calibration and refinement terms.

    .. math::
        \frac1N\sum (y_k-p_k)^2 = \frac1N\sum (y_k-p_k)(1-2p_k) + \frac1N\sum p_k(1-p_k)

    which holds because :math:`y_k^2 = y_k` for binary outcomes.
    """
    y, p = _check(y, p)
    calibration = float(np.mean((y - p) * (1.0 - 2.0 * p)))
    refinement = float(np.mean(p * (1.0 - p)))
    return calibration, refinement


def mixture_loss(y, p=None, alpha=0.5):
    """``alpha`` times the calibration term plus ``1 - alpha`` times the refinement term.

    ``alpha = 0.5`` gives half the Brier score. Larger values put more
    weight on calibration.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    calibration, refinement = brier_decomposition(y, p)
    return alpha * calibration + (1.0 - alpha) * refinement


def citl(y, p=None):
    """Mean absolute difference between outcomes and predictions; 0 is perfect."""
    y, p = _check(y, p)
    return float(np.mean(np.abs(y - p)))


def citl_mean(y, p=None):
    """Absolute gap between the observed event rate and the mean prediction."""
    y, p = _check(y, p)
    return float(abs(y.mean() - p.mean()))


def auroc(y, p=None):
    """Mann-Whitney estimate of the area under the ROC curve, ties counted as 1/2."""
    y, p = _check(y, p)
    pos = y == 1
    n1 = int(pos.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetricError("AUROC needs both outcome classes")
    ranks = rankdata(p)
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def auprc(y, p=None):
    """Average precision over a descending-score sweep.

    Tied scores enter as one block, so precision is evaluated only after
    the whole block has been admitted.
    """
    y, p = _check(y, p)
    n_pos = y.sum()
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive outcome")
    order = np.argsort(-p, kind="stable")
    ys, ps = y[order], p[order]
    # last position of each block of equal scores
    ends = np.r_[np.flatnonzero(np.diff(ps) != 0), len(ps) - 1]
    tp = np.cumsum(ys)[ends]
    seen = ends + 1.0
    new_tp = np.diff(np.r_[0.0, tp])
    return float(np.sum(new_tp * tp / seen) / n_pos)


def _recalibration_logits(p):
    return logit(np.clip(p, LOGIT_CLIP, 1.0 - LOGIT_CLIP))


def calibration_slope(y, p=None, method="logistic"):
    """Slope of observed outcome on prediction.

    ``method="logistic"`` fits ``y ~ a + b * logit(p)`` by unpenalized
    logistic regression and returns ``b``. ``method="linear"`` returns the
    least-squares slope of ``y`` on ``p``.
    """
    y, p = _check(y, p)
    if np.all(y == y[0]):
        raise UndefinedMetricError("calibration slope needs both outcome classes")
    if np.all(p == p[0]):
        raise UndefinedMetricError("calibration slope needs non-constant predictions")
    if method == "linear":
        pc = p - p.mean()
        return float(np.dot(pc, y - y.mean()) / np.dot(pc, pc))
    if method != "logistic":
        raise ValueError(f"unknown slope method {method!r}")
    x = _recalibration_logits(p)
    if np.all(x == x[0]):
        raise UndefinedMetricError("calibration slope needs non-constant predictions")
    coefs, diag = fit_weighted_logistic(
        x[:, None], y, config=FitConfig(max_iterations=100, tolerance=1e-10, ridge_penalty=0.0)
    )
    if not diag.converged:
        raise UndefinedMetricError("recalibration fit did not converge (separated outcomes)")
    return float(coefs.betas[0])


def _tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


class CalibrationCurve:
    """Local-linear tricube smooth of outcomes against predicted probabilities.

    Each evaluation point uses the ``floor(span * n)`` nearest predictions.
    When more than `max_exact` distinct evaluation points are requested,
    the smooth is computed exactly at that many quantiles of the
    predictions and linearly interpolated in between.
    """

    def __init__(self, y, p, span=0.75, max_exact=1000):
        y, p = _check(y, p)
        if len(y) < 10:
            raise UndefinedMetricError("calibration curve needs at least 10 points")
        if not 0 < span <= 1:
            raise ValueError("span must lie in (0, 1]")
        order = np.argsort(p, kind="stable")
        self.p = p[order]
        self.y = y[order]
        self.q = min(len(y), max(2, int(math.floor(span * len(y) + 1e-9))))
        self.max_exact = max_exact

    def _smooth(self, t, chunk=64):
        xs, ys, q = self.p, self.y, self.q
        out = np.empty(len(t))
        for s in range(0, len(t), chunk):
            x0 = t[s : s + chunk, None]
            d = np.abs(xs[None, :] - x0)
            h = np.partition(d, q - 1, axis=1)[:, q - 1 : q]
            safe_h = np.where(h > 0, h, 1.0)
            w = np.where(h > 0, _tricube(d / safe_h), (d == 0).astype(float))
            sw = w.sum(axis=1)
            xbar = (w @ xs) / sw
            ybar = (w @ ys) / sw
            dx = xs[None, :] - xbar[:, None]
            sxx = np.einsum("ij,ij->i", w, dx * dx)
            sxy = (w * dx) @ ys
            # degenerate local design (one distinct x): fall back to weighted mean
            slope = np.where(sxx > 1e-14 * sw, sxy / np.where(sxx > 0, sxx, 1.0), 0.0)
            out[s : s + chunk] = ybar + slope * (x0[:, 0] - xbar)
        return out

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        grid, inverse = np.unique(t, return_inverse=True)
        if len(grid) <= self.max_exact:
            values = self._smooth(grid)[inverse]
        else:
            anchors = np.unique(np.quantile(self.p, np.linspace(0.0, 1.0, self.max_exact)))
            values = np.interp(t, anchors, self._smooth(anchors))
        return np.clip(values, 0.0, 1.0)


def calibration_curve(y, p=None, span=0.75):
    """Return a callable mapping predictions to smoothed observed frequencies."""
    return CalibrationCurve(y, p, span)


def ici(y, p=None, span=0.75):
    """Integrated calibration index.

    Mean absolute gap between the smoothed calibration curve and the
    predictions, taken over the observed predictions so that it is
    weighted by their empirical distribution.
    """
    y, p = _check(y, p)
    curve = CalibrationCurve(y, p, span)
    return float(np.mean(np.abs(curve(p) - p)))


@dataclass(frozen=True)
class PerformanceReport:
    """All measures for one prediction set; ``None`` marks an undefined measure."""

    auroc: float | None = None
    auprc: float | None = None
    citl: float | None = None
    citl_mean: float | None = None
    calibration_slope: float | None = None
    ici: float | None = None
    brier: float | None = None

    def as_dict(self):
        return asdict(self)

    def get(self, measure):
        return getattr(self, measure)


def measure_value(name, y, p, ici_span=0.75, slope_method="logistic"):
    """Value of one named measure, or ``None`` if it is undefined for this input."""
    try:
        if name == "auroc":
            return auroc(y, p)
        if name == "auprc":
            return auprc(y, p)
        if name == "citl":
            return citl(y, p)
        if name == "citl_mean":
            return citl_mean(y, p)
        if name == "calibration_slope":
            return calibration_slope(y, p, method=slope_method)
        if name == "ici":
            return ici(y, p, span=ici_span)
        if name == "brier":
            return brier_score(y, p)
    except UndefinedMetricError:
        return None
    raise KeyError(f"unknown measure {name!r}")


def full_report(y, p=None, ici_span=0.75, slope_method="logistic"):
    y, p = _check(y, p)
    return PerformanceReport(
        **{
            f.name: measure_value(f.name, y, p, ici_span, slope_method)
            for f in fields(PerformanceReport)
        }
    )
