import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppm.data import BINARY, CONTINUOUS
from ppm.simgen import (
    SimulationConfig,
    generate_dataset,
    generate_features,
    latent_features,
    observed_correlations,
    outcome_probability,
    true_linear_predictor,
)


def _offdiag(C):
    return C[~np.eye(len(C), dtype=bool)]


def test_latent_independent_at_zero_r():
    Z = latent_features(SimulationConfig(n=10_000, r=0.0, seed=1))
    assert np.max(np.abs(_offdiag(np.corrcoef(Z, rowvar=False)))) < 0.05


def test_latent_equicorrelation():
    Z = latent_features(SimulationConfig(n=16_000, r=0.2, seed=2))
    off = _offdiag(np.corrcoef(Z, rowvar=False))
    assert np.all(np.abs(off - 0.2) <= 0.03)


def test_binary_columns_balanced():
    cfg = SimulationConfig(n=10_000, seed=3)
    X, kinds = generate_features(cfg)
    binary = [j for j, k in enumerate(kinds) if k == BINARY]
    assert len(binary) == 10
    assert set(np.unique(X[:, binary])) <= {0.0, 1.0}
    assert np.all(np.abs(X[:, binary].mean(axis=0) - 0.5) <= 0.02)


def test_block_order():
    assert SimulationConfig().kinds()[:10] == [CONTINUOUS] * 10
    assert SimulationConfig(binary_first=True).kinds()[:10] == [BINARY] * 10


def test_observed_correlation_attenuated_for_binary_pairs():
    ds = generate_dataset(SimulationConfig(n=16_000, seed=4))
    C = observed_correlations(ds)
    # two dichotomized latents: corr = (2/pi) arcsin(r)
    expected = 2 / math.pi * math.asin(0.2)
    assert abs(C[15, 18] - expected) < 0.03
    assert C[15, 18] < 0.2


def test_linear_predictor_examples():
    assert true_linear_predictor(np.zeros(20)) == -2.0
    x = np.zeros(20)
    x[0] = 1.0
    assert true_linear_predictor(x) == -6.0
    assert true_linear_predictor(x, noise=0.75) == -6.0 + 0.75


def test_linear_predictor_rows():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 8))
    rowwise = [true_linear_predictor(x) for x in X]
    np.testing.assert_allclose(true_linear_predictor(X), rowwise, rtol=0, atol=0)


def test_outcome_probability_examples():
    assert outcome_probability(0.0) == 0.5
    assert outcome_probability(-2.0) == pytest.approx(1 / (1 + math.exp(2)), abs=1e-15)
    assert outcome_probability(-2.0) == pytest.approx(0.11920, abs=1e-5)
    assert outcome_probability(-800.0) == 0.0
    assert outcome_probability(800.0) == 1.0


@given(st.floats(-700, 700))
def test_outcome_probability_symmetry(z):
    assert outcome_probability(z) + outcome_probability(-z) == pytest.approx(1.0, abs=1e-15)


def test_prevalence_default_size():
    ds = generate_dataset(SimulationConfig(seed=5))
    assert ds.n == 16_000 and ds.p == 20
    assert 0.25 <= ds.outcomes.mean() <= 0.55


def test_deterministic():
    a = generate_dataset(SimulationConfig(n=500, seed=9))
    b = generate_dataset(SimulationConfig(n=500, seed=9))
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)


def test_noise_leaves_features_unchanged():
    a = generate_dataset(SimulationConfig(n=500, seed=9, noise_sd=1.0))
    b = generate_dataset(SimulationConfig(n=500, seed=9, noise_sd=3.0))
    np.testing.assert_array_equal(a.features, b.features)


def test_noise_free_outcomes_still_random():
    ds = generate_dataset(SimulationConfig(n=2000, seed=10, noise_sd=0.0))
    prob = outcome_probability(true_linear_predictor(ds.features))
    # a deterministic threshold rule would reproduce y exactly
    assert np.any(ds.outcomes != (prob > 0.5))
    # and the Bernoulli draw tracks the probabilities
    assert abs(ds.outcomes.mean() - prob.mean()) < 0.03


def test_prevalence_converges():
    a = generate_dataset(SimulationConfig(n=50_000, seed=11)).outcomes.mean()
    b = generate_dataset(SimulationConfig(n=50_000, seed=12)).outcomes.mean()
    assert abs(a - b) < 0.01


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=0), dict(n_features=7), dict(n_binary=21), dict(r=1.0), dict(r=-0.1), dict(noise_sd=-1)],
)
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SimulationConfig(**kwargs)
