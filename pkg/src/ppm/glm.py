"""Weighted logistic regression fitted by iteratively reweighted least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dposv as _posv
from scipy.special import expit

PROB_CLIP = 1e-12


class DegenerateOutcomeError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    """IRLS settings.

    `tolerance` bounds the largest absolute coefficient change between
    iterations. `ridge_penalty` applies to the slopes only, never the
    intercept.
    """

    max_iterations: int = 50
    tolerance: float = 1e-8
    ridge_penalty: float = 1e-6

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.ridge_penalty < 0:
            raise ValueError("ridge_penalty must be nonnegative")


@dataclass(frozen=True)
class ModelCoefficients:
    intercept: float
    betas: np.ndarray

    @property
    def vector(self):
        return np.concatenate([[self.intercept], self.betas])


@dataclass(frozen=True)
class FitDiagnostics:
    converged: bool
    iterations: int
    final_change: float


def _design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def _loglik_from_eta(eta, theta, y, w, ridge):
    ll = np.dot(w, y * eta - np.logaddexp(0.0, eta))
    return ll - 0.5 * ridge * np.dot(theta[1:], theta[1:])


def penalized_loglik(theta, Xd, y, w, ridge):
    """Weighted Bernoulli log-likelihood minus ``ridge/2 * ||slopes||^2``.

    `Xd` carries the intercept column first.
    """
    return _loglik_from_eta(Xd @ theta, theta, y, w, ridge)


def penalized_score(theta, Xd, y, w, ridge):
    """Gradient of :func:`penalized_loglik` with respect to ``theta``."""
    mu = expit(Xd @ theta)
    g = Xd.T @ (w * (y - mu))
    g[1:] -= ridge * theta[1:]
    return g


def fit_weighted_logistic(X, y, w=None, config=FitConfig(), init=None):
    """Maximize the weighted, ridge-penalized logistic log-likelihood.

    Newton-Raphson steps are halved whenever the penalized log-likelihood
    would decrease. Rows with zero weight are dropped before fitting, so
    they have no influence on the result.

    Parameters
    ----------
    X : array_like, shape (n, p)
    y : array_like, shape (n,)
    w : array_like, shape (n,), optional
        Nonnegative case weights; defaults to ones.
    config : FitConfig
    init : array_like, shape (p + 1,), optional
        Starting value ``[intercept, betas...]``; zeros by default.

    Returns
    -------
    coefs : ModelCoefficients
    diagnostics : FitDiagnostics
        ``converged`` is False if `max_iterations` was reached. That is
        reported, not raised.
    """
    Xd = _design(X)
    y = np.asarray(y, dtype=float)
    n, k = Xd.shape
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if y.shape != (n,) or w.shape != (n,):
        raise ValueError("X, y and w have inconsistent lengths")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    keep = w > 0
    if not keep.any():
        raise ValueError("sum of weights must be positive")
    if not keep.all():
        Xd, y, w = Xd[keep], y[keep], w[keep]
    if np.all(y == y[0]):
        raise DegenerateOutcomeError("degenerate outcome: a single class among weighted rows")

    ridge = config.ridge_penalty
    penalty = np.full(k, ridge)
    penalty[0] = 0.0
    diag = np.diag_indices(k)
    theta = np.zeros(k) if init is None else np.array(init, dtype=float)
    eta = Xd @ theta
    ll = _loglik_from_eta(eta, theta, y, w, ridge)
    change = np.inf
    converged = False
    it = 0
    while it < config.max_iterations:
        it += 1
        mu = expit(eta)
        grad = Xd.T @ (w * (y - mu)) - penalty * theta
        H = (Xd * (w * mu * (1.0 - mu))[:, None]).T @ Xd
        H[diag] += penalty
        _, step, info = _posv(H, grad, lower=False, overwrite_a=False, overwrite_b=False)
        if info != 0:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        for _ in range(30):
            cand = theta + t * step
            eta_new = Xd @ cand
            ll_new = _loglik_from_eta(eta_new, cand, y, w, ridge)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        change = float(np.max(np.abs(cand - theta)))
        theta, eta, ll = cand, eta_new, ll_new
        if change < config.tolerance:
            converged = True
            break
    if not np.all(np.isfinite(theta)):
        raise FloatingPointError("logistic fit produced non-finite coefficients")
    return (
        ModelCoefficients(float(theta[0]), theta[1:].copy()),
        FitDiagnostics(converged, it, change),
    )


def predict_prob(coefs, x):
    """Inverse-logit of the linear predictor, clipped to ``[1e-12, 1 - 1e-12]``.

    `x` may be a single feature vector or a matrix of rows.
    """
    x = np.asarray(x, dtype=float)
    eta = coefs.intercept + x @ coefs.betas
    p = np.clip(expit(eta), PROB_CLIP, 1.0 - PROB_CLIP)
    return float(p) if np.ndim(p) == 0 else p
