"""Dataset container, CSV ingestion, standardization and resampling plans.

All resampling is a pure function of the input sizes and an integer seed, so
that two runs with the same seed produce identical index sets.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BINARY = "binary"
CONTINUOUS = "continuous"


class DataError(ValueError):
    """Raised for malformed input data."""


def derive_seed(master, *keys):
    """Derive a child seed from a master seed and a sequence of integer keys.

    The derivation goes through :class:`numpy.random.SeedSequence`, so it is
    independent of execution order and of how many other seeds are derived.
    """
    entropy = [int(master) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(int(k) for k in keys)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _infer_kinds(features):
    return [
        BINARY if np.all((col == 0) | (col == 1)) else CONTINUOUS
        for col in features.T
    ]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with a binary outcome.

    Parameters
    ----------
    features : array_like, shape (N, p)
    outcomes : array_like, shape (N,)
        Entries must be exactly 0 or 1.
    feature_names : list of str, optional
        Defaults to ``x1 ... xp``.
    feature_kinds : list of str, optional
        ``"binary"`` or ``"continuous"`` per column; inferred when omitted.
    """

    features: np.ndarray
    outcomes: np.ndarray
    feature_names: tuple = field(default=())
    feature_kinds: tuple = field(default=())

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.outcomes)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset must have at least one row and one feature")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"outcome length {y.shape[0] if y.ndim else 0} does not match "
                f"{X.shape[0]} feature rows"
            )
        if not np.all((y == 0) | (y == 1)):
            raise DataError("outcome not binary")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        y = y.astype(np.int8)
        p = X.shape[1]
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(p))
        kinds = tuple(self.feature_kinds) or tuple(_infer_kinds(X))
        if len(names) != p or len(kinds) != p:
            raise DataError("feature_names/feature_kinds length must equal p")
        for j, kind in enumerate(kinds):
            if kind not in (BINARY, CONTINUOUS):
                raise DataError(f"unknown feature kind {kind!r}")
            if kind == BINARY and not np.all((X[:, j] == 0) | (X[:, j] == 1)):
                raise DataError(f"binary column {names[j]!r} has values outside {{0,1}}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_kinds", kinds)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            self.features[rows], self.outcomes[rows], self.feature_names, self.feature_kinds
        )


def load_csv(path, outcome_column):
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Every column other than `outcome_column` becomes a feature. Row order is
    preserved and a column is typed binary iff all its values are 0 or 1.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if outcome_column not in header:
            raise DataError(f"{path}: outcome column {outcome_column!r} not found")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for name, cell in zip(header, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {lineno}, column {name!r}"
                    ) from None
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: empty dataset")
    table = np.array(rows, dtype=float)
    out_idx = header.index(outcome_column)
    y = table[:, out_idx]
    if not np.all((y == 0) | (y == 1)):
        raise DataError(f"{path}: outcome not binary in column {outcome_column!r}")
    keep = [j for j in range(len(header)) if j != out_idx]
    if not keep:
        raise DataError(f"{path}: no feature columns")
    return Dataset(table[:, keep], y.astype(np.int8), tuple(header[j] for j in keep))


def write_csv(ds, path, outcome_column="y"):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ds.feature_names, outcome_column])
        for row, y in zip(ds.features, ds.outcomes):
            cells = [
                str(int(v)) if kind == BINARY else repr(float(v))
                for v, kind in zip(row, ds.feature_kinds)
            ]
            writer.writerow([*cells, int(y)])


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.scales) <= 0):
            raise ValueError("standardization scales must be strictly positive")

    @classmethod
    def identity(cls, p):
        return cls(np.zeros(p), np.ones(p))


def fit_standardizer(train):
    """Column means and sample standard deviations of ``train``.

    Zero standard deviations (including the single-row case) are replaced
    by 1 so that constant columns become 0 after centering.
    """
    X = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=float)
    means = X.mean(axis=0)
    if X.shape[0] > 1:
        scales = X.std(axis=0, ddof=1)
    else:
        scales = np.zeros(X.shape[1])
    scales = np.where(scales > 0, scales, 1.0)
    return StandardizationParams(means, scales)


def apply_standardizer(ds, params):
    """Return ``ds`` with every feature mapped to ``(x - mean) / scale``."""
    X = ds.features if isinstance(ds, Dataset) else np.asarray(ds, dtype=float)
    if X.shape[1] != len(params.means):
        raise ValueError(
            f"dimension mismatch: {X.shape[1]} columns vs {len(params.means)} parameters"
        )
    Z = (X - params.means) / params.scales
    if not isinstance(ds, Dataset):
        return Z
    # a binary column keeps its kind only if it is still 0/1 valued
    kinds = tuple(
        kind if kind == BINARY and np.all((col == 0) | (col == 1)) else CONTINUOUS
        for kind, col in zip(ds.feature_kinds, Z.T)
    )
    return Dataset(Z, ds.outcomes, ds.feature_names, kinds)


@dataclass(frozen=True)
class SplitPlan:
    """Holdout fraction ``q``, ``K`` folds repeated ``v`` times, and a seed."""

    holdout_fraction: float = 0.2
    K: int = 10
    v: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction out of range")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.v < 1:
            raise ValueError("v must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def check_repetitions(self):
        if self.v * self.K < 200:
            warnings.warn(
                f"v*K = {self.v * self.K} repeated folds is below the recommended 200",
                stacklevel=2,
            )


def holdout_size(n, q):
    # round half up
    return int(math.floor(q * n + 0.5))


def split_holdout(ds, plan):
    """Partition rows into (training-testing set, holdout set)."""
    n_hold = holdout_size(ds.n, plan.holdout_fraction)
    if n_hold < 1 or ds.n - n_hold < 1:
        raise DataError(
            f"dataset of {ds.n} rows too small for holdout fraction {plan.holdout_fraction}"
        )
    rng = np.random.default_rng(plan.seed)
    perm = rng.permutation(ds.n)
    hold = np.sort(perm[:n_hold])
    trte = np.sort(perm[n_hold:])
    return ds.subset(trte), ds.subset(hold)


def kfold_partition(n, K, seed):
    """Shuffle ``range(n)`` and cut it into ``K`` folds whose sizes differ by at most one."""
    if K < 1 or K > n:
        raise ValueError(f"cannot split {n} items into {K} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, K)]
