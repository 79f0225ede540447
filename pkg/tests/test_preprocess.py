import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from oracles import skew_sq_grid

from fpclasso.errors import DegenerateColumn
from fpclasso.preprocess import (
    PreprocessRecord,
    orthogonalize_pca,
    preprocess,
    skew_adjust,
    skew_adjust_matrix,
    skewness,
    standardize,
)


class TestSkewness:
    def test_matches_scipy(self):
        x = np.random.default_rng(0).exponential(size=(200, 4))
        np.testing.assert_allclose(skewness(x), stats.skew(x, axis=0, bias=True), rtol=1e-12)

    def test_symmetric(self):
        assert skewness(np.array([-2.0, -1.0, 0.0, 1.0, 2.0])) == pytest.approx(0.0, abs=1e-15)


class TestSkewAdjust:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.exponential(size=100) + rng.uniform(-3, 3)
        out, shift = skew_adjust(x)
        assert shift is not None
        np.testing.assert_allclose(out, np.log(x + shift))
        ours = skewness(out) ** 2
        assert ours <= skew_sq_grid(x) + 1e-10
        assert ours < skewness(x) ** 2

    def test_lognormal_becomes_symmetric(self):
        x = np.exp(np.random.default_rng(1).standard_normal(500))
        out, _ = skew_adjust(x)
        assert abs(skewness(out)) < 1e-4

    def test_left_skew_left_alone(self):
        # log(x + c) only reduces right skew; a left-skewed column gets worse
        x = -np.random.default_rng(2).exponential(size=200)
        out, shift = skew_adjust(x)
        assert shift is None
        np.testing.assert_array_equal(out, x)

    def test_binary_left_alone(self):
        x = np.array([0.0, 1.0, 1.0, 0.0, 1.0, 1.0])
        out, shift = skew_adjust(x)
        assert shift is None

    def test_constant_raises(self):
        with pytest.raises(DegenerateColumn):
            skew_adjust(np.ones(10))

    def test_matrix_reports(self):
        rng = np.random.default_rng(3)
        X = np.column_stack([rng.exponential(size=80), rng.standard_normal(80), np.full(80, 2.0)])
        out, shifts, before, after = skew_adjust_matrix(X)
        assert not np.isnan(shifts[0])
        assert np.isnan(shifts[2])
        assert abs(after[0]) < abs(before[0])
        np.testing.assert_array_equal(out[:, 2], X[:, 2])


class TestStandardize:
    def test_moments(self):
        z, mean, scale = standardize(np.array([1.0, 2.0, 3.0, 10.0]))
        assert z.mean() == pytest.approx(0.0, abs=1e-15)
        assert np.mean(z**2) == pytest.approx(1.0)
        assert mean == 4.0

    def test_constant(self):
        with pytest.raises(DegenerateColumn):
            standardize(np.full(5, 1.0))


class TestRecord:
    def _raw(self, seed=0):
        rng = np.random.default_rng(seed)
        return np.column_stack([
            rng.exponential(size=60),
            rng.standard_normal(60),
            np.full(60, 7.0),
            (rng.random(60) < 0.4).astype(float),
        ])

    def test_transform_reproduces_training(self):
        X = self._raw()
        Z, rec = preprocess(X, ["e", "g", "c", "b"])
        np.testing.assert_allclose(rec.transform(X), Z, atol=1e-12)
        assert rec.kept == [0, 1, 3]
        assert rec.columns[2].dropped

    def test_unstandardized_predictions(self):
        X = self._raw(1)
        Z, rec = preprocess(X)
        beta = np.array([0.7, -1.2, 0.4])
        b0, full = rec.unstandardize(0.3, beta)
        assert full[2] == 0.0
        np.testing.assert_allclose(rec.linear_predictor(X, b0, full), 0.3 + Z @ beta, atol=1e-8)

    def test_dict_round_trip(self):
        _, rec = preprocess(self._raw(2), ["a", "b", "c", "d"])
        back = PreprocessRecord.from_dict(rec.to_dict())
        assert back == rec

    def test_no_skew(self):
        X = self._raw(3)
        Z, rec = preprocess(X, skew=False)
        assert not any(c.transform_applied for c in rec.columns)
        np.testing.assert_allclose(Z[:, 0], (X[:, 0] - X[:, 0].mean()) / X[:, 0].std())

    @given(arrays(np.float64, (20, 3), elements=st.floats(-1e3, 1e3)))
    @settings(max_examples=50, deadline=None)
    def test_standardized_output(self, X):
        Z, rec = preprocess(X)
        assert Z.shape == (20, len(rec.kept))
        if Z.size:
            assert np.all(np.isfinite(Z))
            np.testing.assert_allclose(Z.mean(0), 0.0, atol=1e-8)


class TestPca:
    def test_orthogonal_scores(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((50, 5)) @ rng.standard_normal((5, 5))
        X -= X.mean(0)
        S, V = orthogonalize_pca(X)
        G = S.T @ S
        np.testing.assert_allclose(G - np.diag(np.diag(G)), 0.0, atol=1e-9)
        np.testing.assert_allclose(S, X @ V, atol=1e-10)
        assert np.all(np.diff(np.diag(G)) <= 1e-9)

    def test_rank_deficient(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((30, 2))
        X = np.column_stack([A, A.sum(1)])
        with pytest.warns(UserWarning, match="rank-deficient"):
            S, V = orthogonalize_pca(X)
        assert S.shape == (30, 2)

    def test_full_rank_silent(self):
        X = np.random.default_rng(2).standard_normal((20, 3))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            orthogonalize_pca(X)
