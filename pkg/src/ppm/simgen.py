"""Synthetic cohort with correlated binary/continuous features and a nonlinear logistic outcome."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import BINARY, CONTINUOUS, Dataset

# independent random streams per purpose
_FEATURES, _NOISE, _OUTCOME = 0, 1, 2


@dataclass(frozen=True)
class SimulationConfig:
    """Generator settings.

    The latent features are standard normal with common pairwise
    correlation ``r``; ``n_binary`` of them are dichotomized at zero. With
    ``binary_first`` the binary block occupies the leading columns.
    """

    n: int = 16000
    n_features: int = 20
    n_binary: int = 10
    r: float = 0.2
    noise_sd: float = 1.0
    seed: int = 0
    binary_first: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.n_features < 8:
            raise ValueError("the outcome model uses features x1..x8; need n_features >= 8")
        if not 0 <= self.n_binary <= self.n_features:
            raise ValueError("n_binary must lie in [0, n_features]")
        # equicorrelation is positive definite iff -1/(p-1) < r < 1; negative r unsupported
        if not 0 <= self.r < 1:
            raise ValueError("r must lie in [0, 1)")
        if not self.noise_sd >= 0:
            raise ValueError("noise_sd must be nonnegative")

    def kinds(self):
        binary = [BINARY] * self.n_binary
        continuous = [CONTINUOUS] * (self.n_features - self.n_binary)
        return binary + continuous if self.binary_first else continuous + binary


def _stream(cfg, purpose):
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, purpose]))


def latent_features(cfg):
    """Equicorrelated standard normal draws, shape ``(n, n_features)``.

    Each column is ``sqrt(r) * common + sqrt(1 - r) * own`` so every pair
    has correlation exactly ``r``.
    """
    rng = _stream(cfg, _FEATURES)
    common = rng.standard_normal((cfg.n, 1))
    own = rng.standard_normal((cfg.n, cfg.n_features))
    return np.sqrt(cfg.r) * common + np.sqrt(1.0 - cfg.r) * own


def generate_features(cfg):
    """Return ``(X, kinds)`` with binary columns obtained as ``latent > 0``."""
    Z = latent_features(cfg)
    kinds = cfg.kinds()
    X = Z.copy()
    for j, kind in enumerate(kinds):
        if kind == BINARY:
            X[:, j] = (Z[:, j] > 0).astype(float)
    return X, kinds


def true_linear_predictor(x, noise=0.0):
    """Nonlinear outcome model on features x1..x8 (1-based), plus additive noise.

    Accepts a single feature vector or a matrix of rows.
    """
    x = np.asarray(x, dtype=float)
    x1, x2, x3, x4, x6, x8 = (x[..., j] for j in (0, 1, 2, 3, 5, 7))
    return -4 * x1 + x6 - 2 * x1 * x3 + 3 * np.exp(x4) - 5 * np.exp(x2 * x8) + noise


def outcome_probability(z):
    z = np.asarray(z, dtype=float)
    out = expit(z)
    return float(out) if out.ndim == 0 else out


def generate_dataset(cfg):
    X, kinds = generate_features(cfg)
    noise = _stream(cfg, _NOISE).normal(0.0, cfg.noise_sd, cfg.n)
    prob = outcome_probability(true_linear_predictor(X, noise))
    y = (_stream(cfg, _OUTCOME).random(cfg.n) < prob).astype(np.int8)
    names = tuple(f"x{j + 1}" for j in range(cfg.n_features))
    return Dataset(X, y, names, tuple(kinds))


def observed_correlations(ds):
    """Pairwise Pearson correlations of the delivered (post-dichotomization) features."""
    return np.corrcoef(ds.features, rowvar=False)
