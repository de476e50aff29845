"""Standardization contract, hyperparameter validation, CSV ingestion."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ssvb
from ssvb.exceptions import ConstantColumnError, NonFiniteError


class TestStandardize:
    def test_three_point_column(self):
        raw = ssvb.RawDataset(y=np.array([1.0, 2.0, 3.0]),
                              X=np.array([[1.0], [2.0], [3.0]]))
        data = ssvb.standardize(raw)
        np.testing.assert_allclose(data.y, [-1.0, 0.0, 1.0], atol=1e-12)
        root = np.sqrt(1.5)
        np.testing.assert_allclose(data.X[:, 0], [-root, 0.0, root],
                                   atol=1e-12)
        assert abs(data.X[:, 0] @ data.X[:, 0] - 3.0) < 1e-12

    def test_idempotent(self, rng):
        raw = ssvb.RawDataset(y=rng.standard_normal(40),
                              X=rng.standard_normal((40, 5)) * 3.0 + 1.0)
        once = ssvb.standardize(raw)
        twice = ssvb.standardize(ssvb.RawDataset(y=once.y, X=once.X))
        np.testing.assert_allclose(twice.y, once.y, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(twice.X, once.X, rtol=1e-10, atol=1e-10)

    def test_random_design_oracle(self, rng):
        # direct recomputation of the column sums and norms
        raw = ssvb.RawDataset(y=rng.standard_normal(50),
                              X=rng.standard_normal((50, 8)))
        data = ssvb.standardize(raw)
        assert np.all(np.abs(data.X.sum(axis=0)) < 1e-10)
        assert np.all(np.abs((data.X**2).sum(axis=0) - 50) <= 1e-8 * 50)
        assert abs(data.y.sum()) <= 1e-8 * 50 * max(np.std(data.y), 1e-12)

    def test_constant_column_rejected(self):
        X = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(ConstantColumnError) as err:
            ssvb.standardize(ssvb.RawDataset(y=np.arange(10.0), X=X))
        assert err.value.column == 0

    def test_non_finite_rejected(self):
        X = np.arange(10.0).reshape(5, 2).copy()
        X[2, 1] = np.nan
        with pytest.raises(NonFiniteError):
            ssvb.RawDataset(y=np.arange(5.0), X=X)

    def test_back_transform_round_trip(self, rng):
        raw = ssvb.RawDataset(y=rng.standard_normal(30),
                              X=rng.standard_normal((30, 4)) * 2.0 + 5.0)
        data = ssvb.standardize(raw)
        beta_std = rng.standard_normal(4)
        pred_std_scale = data.y_mean + data.X @ beta_std
        pred_from_new = data.y_mean + data.transform_new(raw.X) @ beta_std
        np.testing.assert_allclose(pred_from_new, pred_std_scale, rtol=1e-10)


class TestHyperparameters:
    @pytest.mark.parametrize("kwargs", [
        {"v1": 0.0}, {"v1": -1.0}, {"nu": 0.0}, {"lam": -2.0},
        {"a0": 0.0}, {"b0": -1.0}, {"c": 0.0}, {"c": 0.5}, {"c": 0.7},
        {"an_policy": "bogus"}, {"an_policy": "explicit"},
        {"an_policy": "explicit", "an_value": -3.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ssvb.Hyperparameters(**kwargs)

    def test_defaults_valid(self):
        hp = ssvb.Hyperparameters()
        assert hp.a0 == hp.b0 == 1.0
        assert 0 < hp.c < 0.5


class TestVariationalState:
    def test_frozen_requires_boundary(self):
        hp = ssvb.Hyperparameters()
        state = ssvb.VariationalState(
            mu=np.zeros(2), sigma2_j=np.ones(2),
            phi=np.array([0.4, 0.6]), theta_hat=0.5, sigma2_hat=1.0,
            frozen=np.array([True, False]))
        with pytest.raises(ValueError):
            state.validate(hp)
        state.phi[0] = hp.c
        state.validate(hp)


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,a,b\n1.0,2.0,3.0\n4.0,5.0,6.0\n2.5,0.5,1.5\n")
        raw = ssvb.load_csv(path)
        assert raw.feature_names == ("a", "b")
        np.testing.assert_allclose(raw.y, [1.0, 4.0, 2.5])
        assert raw.X.shape == (3, 2)

    def test_requires_y_first(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("resp,a\n1.0,2.0\n3.0,4.0\n")
        with pytest.raises(ValueError):
            ssvb.load_csv(path)

    def test_rejects_non_numeric(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,a\n1.0,2.0\n3.0,oops\n")
        with pytest.raises(ValueError):
            ssvb.load_csv(path)

    def test_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y,a,b\n1.0,2.0,3.0\n4.0,5.0\n")
        with pytest.raises(ValueError):
            ssvb.load_csv(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_standardize_idempotent_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 40))
    p = int(rng.integers(1, 6))
    raw = ssvb.RawDataset(y=rng.standard_normal(n),
                          X=rng.standard_normal((n, p)) * 4.0 - 2.0)
    once = ssvb.standardize(raw)
    twice = ssvb.standardize(ssvb.RawDataset(y=once.y, X=once.X))
    np.testing.assert_allclose(twice.X, once.X, rtol=1e-10, atol=1e-10)
