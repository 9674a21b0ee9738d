"""Personalized predictions: one weighted logistic fit per index patient and subpopulation size."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import apply_standardizer, fit_standardizer
from .glm import FitConfig, fit_weighted_logistic, predict_prob
from .similarity import (
    WeightScheme,
    order_by_similarity,
    rank_weights,
    similarity_matrix,
    similarity_weights,
)

log = logging.getLogger(__name__)


def size_from_proportion(proportion, n_train):
    """``ceiling(proportion * n_train)``, clamped to ``[1, n_train]``.

    A relative fuzz of 1e-12 keeps products such as ``0.2 * 100`` from
    rounding up past the intended integer.
    """
    m = math.ceil(proportion * n_train * (1 - 1e-12))
    return min(max(m, 1), n_train)


@dataclass
class FitCounts:
    """Bookkeeping for degenerate subpopulations and non-converged fits."""

    fallback: int = 0
    nonconverged: int = 0
    fits: int = 0

    def __iadd__(self, other):
        self.fallback += other.fallback
        self.nonconverged += other.nonconverged
        self.fits += other.fits
        return self


def personalized_predictions(
    train_X,
    train_y,
    index_X,
    sizes,
    weight_scheme=WeightScheme.UNIFORM,
    fit=FitConfig(),
    min_events=1,
    standardize=True,
    weight_basis="similarity",
):
    """Predict each index patient from its top-M most similar training patients.

    Parameters
    ----------
    train_X, train_y : training features and 0/1 outcomes
    index_X : array_like, shape (n_index, p)
    sizes : sequence of int
        Subpopulation sizes to evaluate. Entries ``<= 0`` are skipped and
        yield NaN.
    weight_scheme : WeightScheme or str
    fit : FitConfig
    min_events : int
        A subpopulation with fewer than this many members of either
        outcome class is not fitted; its weighted outcome mean is used as
        the prediction instead and counted as a fallback.
    standardize : bool
        z-score features with training statistics before computing
        similarities and fitting.
    weight_basis : {"rank", "similarity"}
        Whether non-uniform weights follow rank position or similarity score.

    Returns
    -------
    preds : ndarray, shape (n_index, len(sizes))
    counts : FitCounts
    """
    train_X = np.asarray(train_X, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    index_X = np.atleast_2d(np.asarray(index_X, dtype=float))
    n_train = len(train_y)
    sizes = [int(m) for m in sizes]
    if any(m > n_train for m in sizes):
        raise ValueError(f"subpopulation size exceeds the {n_train} training patients")
    if standardize:
        params = fit_standardizer(train_X)
        train_X = apply_standardizer(train_X, params)
        index_X = apply_standardizer(index_X, params)

    zero = np.linalg.norm(index_X, axis=1) == 0
    S = np.zeros((len(index_X), n_train))
    if (~zero).any():
        S[~zero] = similarity_matrix(index_X[~zero], train_X)
    if zero.any():
        # no direction to compare: every training patient ties, order falls back to index
        log.warning("%d index patients have zero norm; similarity ties broken by index", zero.sum())
    order = order_by_similarity(S)

    scheme = WeightScheme(weight_scheme)
    if weight_basis not in ("rank", "similarity"):
        raise ValueError(f"unknown weight basis {weight_basis!r}")
    by_rank = weight_basis == "rank" or scheme is WeightScheme.UNIFORM
    weights = {m: rank_weights(m, scheme) for m in set(sizes) if m > 0} if by_rank else {}
    counts = FitCounts()
    preds = np.full((len(index_X), len(sizes)), np.nan)
    shared = {}  # uniform full-population fit is identical for every index patient
    by_size = np.argsort(sizes, kind="stable")

    for i in range(len(index_X)):
        warm = None
        for g in by_size:
            m = sizes[g]
            if m <= 0:
                continue
            if scheme is WeightScheme.UNIFORM and m == n_train and "full" in shared:
                coefs = shared["full"]
                if coefs is None:
                    preds[i, g] = shared["mean"]
                    counts.fallback += 1
                else:
                    preds[i, g] = predict_prob(coefs, index_X[i])
                continue
            rows = order[i, :m]
            w = weights[m] if by_rank else similarity_weights(S[i, rows], scheme)
            y_sub = train_y[rows]
            n_pos = int(np.count_nonzero(y_sub))
            if min(n_pos, m - n_pos) < min_events:
                mean = float(np.dot(w, y_sub) / w.sum())
                preds[i, g] = mean
                counts.fallback += 1
                if scheme is WeightScheme.UNIFORM and m == n_train:
                    shared["full"], shared["mean"] = None, mean
                continue
            coefs, diag = fit_weighted_logistic(train_X[rows], y_sub, w, fit, init=warm)
            counts.fits += 1
            if not diag.converged:
                counts.nonconverged += 1
            else:
                warm = coefs.vector
            preds[i, g] = predict_prob(coefs, index_X[i])
            if scheme is WeightScheme.UNIFORM and m == n_train:
                shared["full"] = coefs
    return preds, counts
