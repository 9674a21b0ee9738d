import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppm.data import (
    DataError,
    Dataset,
    SplitPlan,
    StandardizationParams,
    apply_standardizer,
    derive_seed,
    fit_standardizer,
    kfold_partition,
    load_csv,
    split_holdout,
    write_csv,
)


def _ds(n=10, p=3, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(n, p)), rng.integers(0, 2, n))


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("age,sex,died\n70,1,1\n55,0,0\n80.5,1,1\n")
        ds = load_csv(f, "died")
        assert ds.n == 3
        assert ds.outcomes.tolist() == [1, 0, 1]
        assert ds.feature_names == ("age", "sex")
        assert ds.feature_kinds == ("continuous", "binary")
        assert ds.features[2, 0] == 80.5

    def test_blank_cell_names_row_and_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("age,died\n70,1\n,0\n")
        with pytest.raises(DataError, match=r"row 3.*'age'"):
            load_csv(f, "died")

    def test_non_binary_outcome(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x,y\n1,0\n2,1\n3,2\n")
        with pytest.raises(DataError, match="outcome not binary"):
            load_csv(f, "y")

    def test_missing_file_and_column(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", "y")
        f = tmp_path / "d.csv"
        f.write_text("x,z\n1,0\n")
        with pytest.raises(DataError, match="not found"):
            load_csv(f, "y")

    def test_empty_dataset(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x,y\n")
        with pytest.raises(DataError, match="empty"):
            load_csv(f, "y")

    def test_round_trip(self, tmp_path):
        ds = Dataset(np.array([[0.0, 1.5], [1.0, -2.25]]), [0, 1])
        write_csv(ds, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv", "y")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.outcomes, ds.outcomes)


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(np.ones((3, 2)), [0, 1])
    with pytest.raises(DataError):
        Dataset(np.ones((2, 1)), [0, 2])
    with pytest.raises(DataError):
        Dataset(np.array([[0.5], [1.0]]), [0, 1], ("a",), ("binary",))


class TestStandardizer:
    def test_sample_sd(self):
        params = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
        assert params.means[0] == 2.0
        assert params.scales[0] == 1.0

    def test_constant_column(self):
        params = fit_standardizer(np.array([[5.0], [5.0], [5.0]]))
        assert params.means[0] == 5.0
        assert params.scales[0] == 1.0

    def test_binary_column(self):
        params = fit_standardizer(np.array([[0.0], [1.0], [0.0], [1.0]]))
        assert params.means[0] == 0.5
        # sample variance of {0,1,0,1}: 4 * 0.25 / 3 = 1/3
        assert params.scales[0] == pytest.approx(np.sqrt(1 / 3), abs=1e-12)
        assert params.scales[0] == pytest.approx(0.5774, abs=1e-4)

    def test_self_application_centres(self):
        ds = _ds(50, 4)
        z = apply_standardizer(ds, fit_standardizer(ds))
        np.testing.assert_allclose(z.features.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_array_equal(z.outcomes, ds.outcomes)

    def test_identity(self):
        ds = _ds()
        z = apply_standardizer(ds, StandardizationParams.identity(ds.p))
        np.testing.assert_array_equal(z.features, ds.features)
        twice = apply_standardizer(z, StandardizationParams.identity(ds.p))
        np.testing.assert_allclose(twice.features, z.features, atol=1e-12)

    def test_arithmetic(self):
        z = apply_standardizer(np.array([[3.0]]), StandardizationParams(np.array([2.0]), np.array([1.0])))
        assert z[0, 0] == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            apply_standardizer(_ds(p=3), StandardizationParams.identity(2))


class TestSplits:
    def test_holdout_sizes(self):
        trte, hold = split_holdout(_ds(100), SplitPlan(0.2, seed=1))
        assert (hold.n, trte.n) == (20, 80)
        trte, hold = split_holdout(_ds(2), SplitPlan(0.5, seed=1))
        assert (hold.n, trte.n) == (1, 1)

    def test_holdout_round_half_up(self):
        _, hold = split_holdout(_ds(5), SplitPlan(0.5, seed=0))
        assert hold.n == 3

    def test_holdout_partition_and_determinism(self):
        ds = Dataset(np.arange(30.0)[:, None] + 1, np.arange(30) % 2)
        a = split_holdout(ds, SplitPlan(0.3, seed=7))
        b = split_holdout(ds, SplitPlan(0.3, seed=7))
        rows_tr = set(a[0].features[:, 0])
        rows_ho = set(a[1].features[:, 0])
        assert rows_tr.isdisjoint(rows_ho)
        assert rows_tr | rows_ho == set(ds.features[:, 0])
        np.testing.assert_array_equal(a[1].features, b[1].features)

    def test_holdout_too_small(self):
        with pytest.raises(DataError, match="too small"):
            split_holdout(_ds(1), SplitPlan(0.2))

    def test_kfold_examples(self):
        folds = kfold_partition(10, 10, 0)
        assert sorted(len(f) for f in folds) == [1] * 10
        assert [len(f) for f in kfold_partition(10, 3, 0)] == [4, 3, 3]
        with pytest.raises(ValueError):
            kfold_partition(3, 4, 0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 200), st.integers(1, 20), st.integers(0, 2**64 - 1))
    def test_kfold_partition_property(self, n, K, seed):
        K = min(K, n)
        folds = kfold_partition(n, K, seed)
        allidx = np.concatenate(folds)
        assert sorted(allidx.tolist()) == list(range(n))
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        again = kfold_partition(n, K, seed)
        assert all(np.array_equal(a, b) for a, b in zip(folds, again))

    def test_split_plan_validation(self):
        with pytest.raises(ValueError, match="holdout_fraction out of range"):
            SplitPlan(1.5)
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            SplitPlan(K=5, v=5).check_repetitions()
        assert w


def test_derive_seed_distinct_and_stable():
    seeds = [derive_seed(42, r) for r in range(100)]
    assert len(set(seeds)) == 100
    assert derive_seed(42, 3) == derive_seed(42, 3)
    assert derive_seed(42, 3) != derive_seed(43, 3)
