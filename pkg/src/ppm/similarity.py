"""Cosine similarity, top-M subpopulation selection and within-subpopulation weights."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset

log = logging.getLogger(__name__)


class UndefinedSimilarityError(ValueError):
    pass


class WeightScheme(str, Enum):
    UNIFORM = "uniform"
    HALF_TRICUBE = "half_tricube"
    ANTI_SIMILAR = "anti_similar"


def cosine_similarity(a, b):
    """Cosine of the angle between `a` and `b`, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("vectors must be one-dimensional and of equal length")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedSimilarityError("undefined similarity: zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def similarity_matrix(index_X, train_X):
    """Cosine similarity of every index row against every training row.

    Training rows with zero norm get score -1 so they rank last. Index rows
    must have nonzero norm.

    Returns
    -------
    S : ndarray, shape (n_index, n_train)
    """
    index_X = np.atleast_2d(np.asarray(index_X, dtype=float))
    train_X = np.atleast_2d(np.asarray(train_X, dtype=float))
    if index_X.shape[1] != train_X.shape[1]:
        raise ValueError("dimension mismatch between index patient and training data")
    ni = np.linalg.norm(index_X, axis=1)
    if np.any(ni == 0):
        raise UndefinedSimilarityError("undefined similarity: index patient has zero norm")
    nt = np.linalg.norm(train_X, axis=1)
    zero = nt == 0
    if np.any(zero):
        log.warning("%d training patients have zero norm; scored -1", int(zero.sum()))
    S = (index_X / ni[:, None]) @ (train_X / np.where(zero, 1.0, nt)[:, None]).T
    np.clip(S, -1.0, 1.0, out=S)
    S[:, zero] = -1.0
    return S


def order_by_similarity(S):
    """Per-row ordering: descending score, ties by ascending training index."""
    return np.argsort(-S, axis=-1, kind="stable")


@dataclass(frozen=True)
class SimilarityRanking:
    """Training patients sorted from most to least similar."""

    indices: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.indices)


def rank_by_similarity(index_patient, train):
    X = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=float)
    s = similarity_matrix(np.asarray(index_patient, dtype=float)[None, :], X)[0]
    order = order_by_similarity(s)
    return SimilarityRanking(order, s[order])


@dataclass(frozen=True)
class Subpopulation:
    member_indices: np.ndarray
    weights: np.ndarray

    @property
    def M(self):
        return len(self.member_indices)


def select_top_m(ranking, M):
    if not 1 <= M <= len(ranking):
        raise ValueError(f"M={M} out of range 1..{len(ranking)}")
    return Subpopulation(ranking.indices[:M].copy(), np.ones(M))


def rank_weights(M, scheme):
    """Weights for rank positions ``0..M-1`` of a subpopulation.

    ``half_tricube`` is the decreasing half of the tricube kernel over rank
    position divided by `M`; ``anti_similar`` is that vector reversed.
    """
    scheme = WeightScheme(scheme)
    if scheme is WeightScheme.UNIFORM:
        return np.ones(M)
    u = np.arange(M) / M
    w = (1.0 - u**3) ** 3
    if scheme is WeightScheme.ANTI_SIMILAR:
        w = w[::-1].copy()
    return w


def similarity_weights(scores, scheme):
    """Weights from the similarity scores of a ranked subpopulation.

    ``half_tricube`` applies the tricube kernel to the cosine distance
    ``(1 - s) / 2``, which lies in [0, 1]; ``anti_similar`` reverses those
    weights across the ranking. Members with ``s = -1`` get weight 0.
    """
    scheme = WeightScheme(scheme)
    scores = np.asarray(scores, dtype=float)
    if scheme is WeightScheme.UNIFORM:
        return np.ones(len(scores))
    w = (1.0 - ((1.0 - scores) / 2.0) ** 3) ** 3
    if scheme is WeightScheme.ANTI_SIMILAR:
        w = w[::-1].copy()
    return w


def apply_weights(sub, ranking, scheme, basis="similarity"):
    """Attach weights to a subpopulation that is a prefix of `ranking`.

    `basis` selects rank-position weights (:func:`rank_weights`) or
    similarity-score weights (:func:`similarity_weights`).
    """
    M = sub.M
    if not np.array_equal(sub.member_indices, ranking.indices[:M]):
        raise ValueError("subpopulation members must be a prefix of the ranking")
    if basis == "rank":
        return Subpopulation(sub.member_indices, rank_weights(M, scheme))
    if basis == "similarity":
        return Subpopulation(sub.member_indices, similarity_weights(ranking.scores[:M], scheme))
    raise ValueError(f"unknown weight basis {basis!r}")
