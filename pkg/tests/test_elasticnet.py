import numpy as np
import pytest

from stackgen.learners.elasticnet import (binomial_deviance,
                                          fit_elastic_net_cv, fit_lasso_ic,
                                          gaussian_path, lambda_grid,
                                          logistic_path)
from stackgen.learners.linear import sigmoid


def orthonormal_design(n, p, seed):
    """Column-centered X with (1/n) X'X = I."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, p))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q * np.sqrt(n)


class TestGrid:
    def test_endpoints_exact(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        grid = lambda_grid(X, y, 1.0, n_alphas=100, eps=1e-3)
        Xc = X - X.mean(axis=0)
        lam_max = np.abs(Xc.T @ (y - y.mean())).max() / 50
        assert grid[0] == lam_max
        assert grid[-1] == lam_max * 1e-3
        assert grid.shape == (100,)

    def test_lambda_max_kills_all_slopes(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 5))
        y = X @ rng.normal(size=5) + rng.normal(size=40)
        grid = lambda_grid(X, y, 1.0)
        coefs, _ = gaussian_path(X, y, grid[:1], 1.0, tol=1e-12)
        assert np.abs(coefs[0]).max() == 0.0


class TestGaussianPath:
    def test_soft_threshold_on_orthonormal_design(self):
        X = orthonormal_design(80, 5, seed=2)
        rng = np.random.default_rng(3)
        y = rng.normal(size=80)
        bols = X.T @ (y - y.mean()) / 80
        for lam_scale in (0.1, 0.4, 0.9):
            lam = lam_scale * np.abs(bols).max()
            coefs, _ = gaussian_path(X, y, np.array([lam]), 1.0,
                                     max_iter=5000, tol=1e-13)
            expected = np.sign(bols) * np.maximum(np.abs(bols) - lam, 0.0)
            assert np.abs(coefs[0] - expected).max() < 1e-8

    def test_ridge_matches_closed_form(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(60, 4))
        y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.normal(size=60)
        lam = 0.37
        coefs, icpts = gaussian_path(X, y, np.array([lam]), 0.0,
                                     max_iter=20000, tol=1e-14)
        Xc = X - X.mean(axis=0)
        yc = y - y.mean()
        closed = np.linalg.solve(Xc.T @ Xc + 60 * lam * np.eye(4), Xc.T @ yc)
        assert np.abs(coefs[0] - closed).max() < 1e-8

    def test_kkt_conditions(self):
        rng = np.random.default_rng(5)
        n, p = 70, 6
        base = rng.normal(size=(n, p))
        X = base + 0.6 * base[:, [0]]  # correlated design
        y = X @ rng.normal(size=p) + rng.normal(size=n)
        grid = lambda_grid(X, y, 1.0, n_alphas=15)
        coefs, icpts = gaussian_path(X, y, grid, 1.0, max_iter=50000, tol=1e-13)
        Xc = X - X.mean(axis=0)
        yc = y - y.mean()
        for li, lam in enumerate(grid):
            b = coefs[li]
            g = Xc.T @ (yc - Xc @ b) / n
            zero = b == 0
            assert np.all(np.abs(g[zero]) <= lam + 1e-6)
            if (~zero).any():
                assert np.abs(g[~zero] - lam * np.sign(b[~zero])).max() < 1e-6


class TestElasticNetCv:
    def test_single_huge_lambda_full_shrinkage(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(50, 3))
        y = X @ np.ones(3) + rng.normal(size=50)
        m = fit_elastic_net_cv(X, y, 1.0, alphas=[1e9], seed=0)
        assert np.abs(m.coef).max() == 0.0
        assert m.intercept == pytest.approx(y.mean(), abs=1e-12)

    def test_degenerate_outcome_warns_intercept_only(self):
        X = np.random.default_rng(7).normal(size=(20, 2))
        y = np.full(20, 3.25)
        with pytest.warns(UserWarning, match="zero variance"):
            m = fit_elastic_net_cv(X, y, 1.0, seed=0)
        assert np.all(m.coef == 0) and m.intercept == 3.25

    def test_bfolds_too_small(self):
        X = np.ones((10, 1))
        with pytest.raises(Exception, match="folds"):
            fit_elastic_net_cv(X, np.arange(10.0), 1.0, bfolds=1, seed=0)

    def test_cv_recovers_signal(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(120, 8))
        y = 2.0 * X[:, 0] - 1.5 * X[:, 3] + 0.2 * rng.normal(size=120)
        m = fit_elastic_net_cv(X, y, 1.0, n_alphas=40, seed=1)
        assert abs(m.coef[0] - 2.0) < 0.15
        assert abs(m.coef[3] + 1.5) < 0.15

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(40, 4))
        y = rng.normal(size=40)
        a = fit_elastic_net_cv(X, y, 0.5, n_alphas=12, seed=5)
        b = fit_elastic_net_cv(X, y, 0.5, n_alphas=12, seed=5)
        assert np.array_equal(a.coef, b.coef) and a.lambda_ == b.lambda_


class TestLogisticPath:
    def test_ridge_logistic_matches_newton_oracle(self):
        rng = np.random.default_rng(10)
        n, p = 60, 3
        X = rng.normal(size=(n, p))
        y = (rng.random(n) < sigmoid(X @ np.array([1.0, -1.0, 0.5]))).astype(float)
        lam = 0.1
        coefs, icpts = logistic_path(X, y, np.array([lam]), 0.0,
                                     max_iter=20000, tol=1e-12, outer_iter=200)
        # oracle: full Newton on (1/n) neg-loglik + (lam/2)|b|^2, free intercept
        A = np.hstack([np.ones((n, 1)), X])
        beta = np.zeros(p + 1)
        pen = np.array([0.0] + [lam] * p)
        for _ in range(200):
            pr = sigmoid(A @ beta)
            g = -A.T @ (y - pr) / n + pen * beta
            H = A.T @ (A * (pr * (1 - pr))[:, None]) / n + np.diag(pen)
            beta = beta - np.linalg.solve(H, g)
        assert abs(icpts[0] - beta[0]) < 1e-5
        assert np.abs(coefs[0] - beta[1:]).max() < 1e-5

    def test_classification_cv_runs_and_predicts_probabilities(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(80, 4))
        y = (rng.random(80) < sigmoid(1.5 * X[:, 0])).astype(float)
        m = fit_elastic_net_cv(X, y, 1.0, n_alphas=10, task="classify", seed=2)
        p = m.predict(X)
        assert p.min() >= 0.0 and p.max() <= 1.0
        assert binomial_deviance(y, p) < binomial_deviance(y, np.full(80, y.mean()))


class TestLassoIc:
    def test_bic_picks_empty_model_on_pure_noise(self):
        rng = np.random.default_rng(12)
        n, p = 200, 5
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n)
        m = fit_lasso_ic(X, y, criterion="bic")
        assert np.count_nonzero(m.coef) == 0
        # selection must match exhaustive evaluation over the same path
        grid = lambda_grid(X, y, 1.0)
        coefs, icpts = gaussian_path(X, y, grid, 1.0)
        crit = np.empty(len(grid))
        for li in range(len(grid)):
            rss = float(np.sum((y - icpts[li] - X @ coefs[li]) ** 2))
            crit[li] = n * np.log(rss / n) + np.log(n) * np.count_nonzero(coefs[li])
        assert m.lambda_ == grid[int(np.argmin(crit))]

    def test_strong_predictor_always_selected(self):
        rng = np.random.default_rng(13)
        n = 200
        X = rng.normal(size=(n, 5))
        y = 3.0 * X[:, 2] + 0.5 * rng.normal(size=n)
        for criterion in ("aic", "bic"):
            m = fit_lasso_ic(X, y, criterion=criterion)
            assert m.coef[2] != 0.0

    def test_null_model_criterion_value(self):
        rng = np.random.default_rng(14)
        n = 100
        X = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        # df of the all-zero-slope model is 0, so criterion = n*ln(Var(y))
        grid = lambda_grid(X, y, 1.0)
        coefs, icpts = gaussian_path(X, y, grid[:1], 1.0)
        assert np.count_nonzero(coefs[0]) == 0
        rss = float(np.sum((y - icpts[0]) ** 2))
        crit = n * np.log(rss / n)
        assert crit == pytest.approx(n * np.log(np.var(y)), rel=1e-12)

    def test_classify_rejected(self):
        with pytest.raises(Exception, match="aic|bic|criterion"):
            fit_lasso_ic(np.ones((10, 1)), np.arange(10.0), criterion="cv")
