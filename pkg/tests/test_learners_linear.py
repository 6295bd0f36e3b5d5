import numpy as np
import pytest

from stackgen.errors import ConvergenceWarning
from stackgen.learners.linear import (fit_logit, fit_ols, platt_calibration,
                                      sigmoid)


def newton_logit_oracle(X, y, iters=60):
    """Independent plain Newton solver (no step halving, explicit inverse)."""
    A = np.hstack([np.ones((X.shape[0], 1)), X])
    beta = np.zeros(A.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(A @ beta)))
        W = p * (1 - p)
        H = A.T @ (A * W[:, None])
        g = A.T @ (y - p)
        beta = beta + np.linalg.inv(H + 1e-12 * np.eye(A.shape[1])) @ g
    return beta


class TestOls:
    def test_exact_linear_data(self):
        x = np.linspace(-2, 2, 25)
        y = 2 * x + 1
        m = fit_ols(x[:, None], y)
        assert abs(m.coef[0] - 2) < 1e-10
        assert abs(m.intercept - 1) < 1e-10

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            X = rng.normal(size=(40, 5))
            y = rng.normal(size=40)
            m = fit_ols(X, y)
            r = y - m.predict(X)
            assert np.abs(X.T @ r).max() < 1e-8 * np.linalg.norm(y)

    def test_no_intercept(self):
        x = np.array([[1.0], [2.0], [4.0]])
        m = fit_ols(x, 3 * x[:, 0], fit_intercept=False)
        assert m.intercept == 0.0
        assert abs(m.coef[0] - 3) < 1e-12


class TestLogit:
    def test_matches_independent_newton_on_ten_points(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(10, 2))
        eta = 0.8 * X[:, 0] - 0.5 * X[:, 1]
        y = (rng.random(10) < sigmoid(eta)).astype(float)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        m = fit_logit(X, y, max_iter=200, tol=1e-10)
        beta_oracle = newton_logit_oracle(X, y)
        mine = np.concatenate([[m.intercept], m.coef])
        p_m = sigmoid(np.hstack([np.ones((10, 1)), X]) @ mine)
        p_o = sigmoid(np.hstack([np.ones((10, 1)), X]) @ beta_oracle)
        assert np.abs(p_m - p_o).max() < 1e-6

    def test_training_point_of_class_one_above_half(self):
        # separable-ish: class 1 points sit far to the right; the fit may
        # stop on the likelihood plateau or warn at max_iter, either is fine
        import warnings
        X = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
        y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            m = fit_logit(X, y, max_iter=20)
        assert m.predict(X[[5]])[0] > 0.5
        assert m.predict(X[[0]])[0] < 0.5

    def test_predict_is_pure(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 3))
        y = (rng.random(30) < 0.5).astype(float)
        m = fit_logit(X, y)
        assert np.array_equal(m.predict(X), m.predict(X))

    def test_probabilities_in_unit_interval(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(50, 2)) * 50
        y = (X[:, 0] > 0).astype(float)
        with pytest.warns(ConvergenceWarning):
            m = fit_logit(X, y, max_iter=5)
        p = m.predict(rng.normal(size=(100, 2)) * 100)
        assert p.min() >= 0.0 and p.max() <= 1.0


class TestPlatt:
    def test_monotone_in_score(self):
        rng = np.random.default_rng(11)
        scores = rng.normal(size=200)
        y = (rng.random(200) < sigmoid(3 * scores)).astype(float)
        a, b = platt_calibration(scores, y)
        assert a > 0  # higher score, higher probability

    def test_separated_scores_stay_finite(self):
        scores = np.array([-5.0, -4.0, -3.0, 3.0, 4.0, 5.0])
        y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        a, b = platt_calibration(scores, y)
        assert np.isfinite(a) and np.isfinite(b)
        p = sigmoid(a * scores + b)
        assert p.min() > 0.0 and p.max() < 1.0
