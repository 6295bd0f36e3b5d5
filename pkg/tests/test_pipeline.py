import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackgen.errors import PipelineError
from stackgen.pipeline import (PipelineSpec, fit_transform, knn_impute,
                               parse_pipeline, transform)


def fit1(spec_text, X):
    return fit_transform(parse_pipeline(spec_text), np.asarray(X, float))


class TestStdScaler:
    def test_population_variance_scaling(self):
        # (x - 2)/sigma with sigma = sqrt(2/3)
        _, out = fit1("stdscaler", [[1.0], [2.0], [3.0]])
        sigma = math.sqrt(2.0 / 3.0)
        expected = np.array([(1 - 2) / sigma, 0.0, (3 - 2) / sigma])
        assert np.allclose(out[:, 0], expected, atol=1e-12)
        assert abs(out[0, 0] - -1.22474) < 1e-5

    def test_zero_variance_column_passes_through(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        with pytest.warns(UserWarning, match="zero-variance"):
            _, out = fit1("stdscaler", X)
        assert np.array_equal(out[:, 1], X[:, 1])

    def test_train_moments(self):
        rng = np.random.default_rng(0)
        X = rng.normal(3, 7, size=(200, 4))
        _, out = fit1("stdscaler", X)
        assert np.abs(out.mean(axis=0)).max() < 1e-10
        assert np.abs(out.var(axis=0) - 1).max() < 1e-10


class TestMinMax:
    def test_linear_map(self):
        fitted, _ = fit1("minmaxscaler", [[0.0], [10.0]])
        out = transform(fitted, [[5.0]])
        assert out[0, 0] == 0.5


class TestPolynomials:
    def test_poly2_columns(self):
        a, b = 2.0, 3.0
        _, out = fit1("poly2", [[a, b], [1.0, 1.0]])
        assert out.shape[1] == 2 + 3  # p + p(p+1)/2, no bias column
        assert np.allclose(out[0], [a, b, a * a, a * b, b * b])

    def test_interact_columns(self):
        a, b, c = 2.0, 3.0, 5.0
        _, out = fit1("interact", [[a, b, c], [1.0, 1.0, 1.0]])
        assert np.allclose(out[0], [a, b, c, a * b, a * c, b * c])

    @pytest.mark.parametrize("p", range(1, 7))
    def test_poly_column_counts(self, p):
        rng = np.random.default_rng(p)
        X = rng.normal(size=(4, p))
        _, out2 = fit1("poly2", X)
        assert out2.shape[1] == p + p * (p + 1) // 2
        _, out3 = fit1("poly3", X)
        d3 = p * (p + 1) * (p + 2) // 6
        assert out3.shape[1] == p + p * (p + 1) // 2 + d3
        _, outi = fit1("interact", X)
        assert outi.shape[1] == p + p * (p - 1) // 2


class TestImputers:
    def test_median_passthrough(self):
        fitted, _ = fit1("medianimputer", [[1.0], [2.0], [3.0], [np.nan]])
        out = transform(fitted, [[np.nan]])
        assert out[0, 0] == 2.0

    def test_knn_fit_k_too_large(self):
        with pytest.raises(PipelineError, match="k=5"):
            fit1("knnimputer", [[1.0], [2.0], [3.0]])

    def test_knn_step_with_param(self):
        X = np.array([[0.0, 0.0], [10.0, 10.0], [0.2, 0.1], [np.nan, 0.09]])
        fitted, out = fit1("knnimputer(1)", X)
        assert not np.isnan(out).any()
        # nearest donor row to (nan, 0.09) on the shared coordinate is
        # (0.2, 0.1); the incomplete row itself cannot donate
        assert out[3, 0] == 0.2


class TestKnnImputeOp:
    def test_nearest_neighbor(self):
        Xref = np.array([[0.0, 0.0], [10.0, 10.0]])
        out = knn_impute(Xref, np.array([0.1, np.nan]), k=1)
        assert np.array_equal(out, [0.1, 0.0])

    def test_all_neighbors_gives_column_mean(self):
        Xref = np.array([[0.0, 1.0], [1.0, 3.0], [2.0, 8.0]])
        out = knn_impute(Xref, np.array([0.5, np.nan]), k=3)
        assert out[1] == pytest.approx(4.0)

    def test_distance_ties_break_to_lower_row(self):
        Xref = np.array([[1.0, 5.0], [1.0, 9.0], [3.0, 100.0]])
        out = knn_impute(Xref, np.array([1.0, np.nan]), k=1)
        assert out[1] == 5.0

    def test_no_shared_coordinates(self):
        Xref = np.array([[np.nan, 1.0], [np.nan, 2.0]])
        with pytest.raises(PipelineError, match="shares"):
            knn_impute(Xref, np.array([3.0, np.nan]), k=1)

    def test_rescaled_distance_flips_winner(self):
        # raw shared-coordinate distances: row 0 = 0.5 (1 shared coord),
        # row 1 = 0.601 (2 shared); rescaling by sqrt(p/p_shared) gives
        # 0.5*sqrt(3) = 0.866 vs 0.601*sqrt(3/2) = 0.736, so row 1 wins
        Xref = np.array([[0.5, np.nan, 111.0], [0.42, 0.43, 222.0]])
        x = np.array([0.0, 0.0, np.nan])
        out = knn_impute(Xref, x, k=1)
        assert out[2] == 222.0


class TestOnehot:
    def test_dummy_block_rows_sum_to_one(self):
        X = np.array([[0.0, 2.0], [1.0, 2.0], [1.0, 3.0]])
        fitted, out = fit1("onehot", X)
        # two blocks: column 0 has 2 levels, column 1 has 2 levels
        assert out.shape[1] == 4
        assert np.array_equal(out[:, :2].sum(axis=1), np.ones(3))
        assert np.array_equal(out[:, 2:].sum(axis=1), np.ones(3))

    def test_unseen_category_maps_to_zeros(self):
        fitted, _ = fit1("onehot", [[0.0], [1.0]])
        with pytest.warns(UserWarning, match="unseen"):
            out = transform(fitted, [[2.0]])
        assert np.array_equal(out[0], [0.0, 0.0])


class TestPipelineContract:
    def test_transform_reproduces_fit_transform_bitwise(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 3))
        X[3, 1] = np.nan
        fitted, out = fit1("medianimputer stdscaler poly2", X)
        again = transform(fitted, X)
        assert np.array_equal(out, again)

    def test_nan_reaching_non_imputer_errors(self):
        X = np.array([[1.0], [np.nan]])
        with pytest.raises(PipelineError, match="NaN"):
            fit1("stdscaler", X)

    def test_sparse_backend_rejected(self):
        with pytest.raises(PipelineError, match="dense backend only"):
            parse_pipeline("sparse")
        with pytest.raises(PipelineError, match="dense backend only"):
            parse_pipeline("stdscaler0")

    def test_unknown_step_rejected(self):
        with pytest.raises(PipelineError, match="unknown"):
            parse_pipeline("quantilescaler")

    def test_column_count_mismatch(self):
        fitted, _ = fit1("stdscaler", [[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(PipelineError, match="columns"):
            transform(fitted, [[1.0]])

    @given(st.lists(st.sampled_from(
        ["stdscaler", "minmaxscaler", "poly2", "interact", "medianimputer"]),
        min_size=1, max_size=3),
        st.integers(0, 10 ** 6))
    @settings(max_examples=40, deadline=None)
    def test_composition_property(self, steps, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(12, 3))
        spec = PipelineSpec(tuple((s, {}) for s in steps))
        fitted, out = fit_transform(spec, X)
        assert np.array_equal(transform(fitted, X), out)
        assert fitted.p_out == out.shape[1]
