import numpy as np
import pytest

from stackgen.errors import SpecError
from stackgen.learners.svm import fit_linear_svm


def svc_primal(w, X, y, C):
    ypm = np.where(y == 1.0, 1.0, -1.0)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    margins = ypm * (Xa @ w)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def svr_primal(w, X, y, C, eps):
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    r = np.abs(Xa @ w - y)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, r - eps).sum())


class TestSvc:
    def test_separable_zero_hinge_with_large_C(self):
        X = np.array([[0.0, 0.0], [2.0, 2.0]])
        y = np.array([0.0, 1.0])
        m = fit_linear_svm(X, y, C=100.0, mode="svc", tol=1e-10, max_iter=20000)
        ypm = np.array([-1.0, 1.0])
        Xa = np.hstack([X, np.ones((2, 1))])
        hinge = np.maximum(0.0, 1.0 - ypm * (Xa @ m.w)).sum()
        assert hinge < 1e-6
        scores = m.decision(X)
        assert scores[0] < 0 < scores[1]

    def test_doubling_C_keeps_decision_signs(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(-2, 0.3, size=(10, 2)),
                       rng.normal(2, 0.3, size=(10, 2))])
        y = np.array([0.0] * 10 + [1.0] * 10)
        m1 = fit_linear_svm(X, y, C=10.0, mode="svc", tol=1e-10, max_iter=20000)
        m2 = fit_linear_svm(X, y, C=20.0, mode="svc", tol=1e-10, max_iter=20000)
        assert np.array_equal(np.sign(m1.decision(X)), np.sign(m2.decision(X)))

    def test_dual_matches_primal_grid_search(self):
        # 1D problem: grid over (slope, bias) of the exact primal objective
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 1))
        y = (X[:, 0] + 0.5 * rng.normal(size=20) > 0).astype(float)
        C = 1.0
        m = fit_linear_svm(X, y, C=C, mode="svc", tol=1e-12, max_iter=50000)
        obj = svc_primal(m.w, X, y, C)
        best = np.inf
        for s in np.linspace(-4, 4, 161):
            for b in np.linspace(-4, 4, 161):
                best = min(best, svc_primal(np.array([s, b]), X, y, C))
        assert obj <= best + 1e-4

    def test_probabilities_in_unit_interval(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 2))
        y = (X[:, 0] > 0).astype(float)
        m = fit_linear_svm(X, y, mode="svc")
        p = m.predict(X * 100)
        assert p.min() >= 0.0 and p.max() <= 1.0


class TestSvr:
    def test_epsilon_tube_covers_data_flat_fit(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(15, 1))
        y = 0.05 * rng.normal(size=15)
        m = fit_linear_svm(X, y, epsilon=10.0, mode="svr", tol=1e-12,
                           max_iter=20000)
        assert np.abs(m.w).max() < 1e-9  # slope and bias both zero-loss at 0

    def test_dual_matches_primal_grid_search(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(25, 1))
        y = 1.2 * X[:, 0] + 0.3 + 0.2 * rng.normal(size=25)
        C, eps = 2.0, 0.15
        m = fit_linear_svm(X, y, C=C, epsilon=eps, mode="svr", tol=1e-12,
                           max_iter=50000)
        obj = svr_primal(m.w, X, y, C, eps)
        best = np.inf
        for s in np.linspace(0.0, 2.5, 251):
            for b in np.linspace(-1.0, 1.5, 251):
                best = min(best, svr_primal(np.array([s, b]), X, y, C, eps))
        assert obj <= best + 1e-4

    def test_parameter_validation(self):
        X = np.ones((4, 1)); y = np.arange(4.0)
        with pytest.raises(SpecError, match="C must"):
            fit_linear_svm(X, y, C=0.0, mode="svr")
        with pytest.raises(SpecError, match="epsilon"):
            fit_linear_svm(X, y, epsilon=-0.1, mode="svr")

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(20, 2))
        y = rng.normal(size=20)
        a = fit_linear_svm(X, y, mode="svr")
        b = fit_linear_svm(X, y, mode="svr")
        assert np.array_equal(a.w, b.w)
