import numpy as np
import pytest

from stackgen.errors import SpecError
from stackgen.learners.boosting import fit_gradient_boost


def synth(n=100, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = np.sin(2 * X[:, 0]) + 0.5 * X[:, 1] + 0.2 * rng.normal(size=n)
    return X, y


class TestRegressionBoosting:
    def test_one_step_identity(self):
        X, y = synth(50, seed=1)
        m = fit_gradient_boost(X, y, learning_rate=1.0, n_estimators=1,
                               max_depth=None, seed=2)
        # a single unshrunk full-depth tree interpolates the residuals
        assert np.abs(m.predict(X) - y).max() < 1e-12

    def test_zero_trees_predicts_mean(self):
        X, y = synth(40, seed=3)
        m = fit_gradient_boost(X, y, n_estimators=0, seed=0)
        assert np.all(m.predict(X) == np.mean(y))

    def test_training_mse_monotone(self):
        X, y = synth(100, seed=4)
        m = fit_gradient_boost(X, y, learning_rate=0.2, n_estimators=60, seed=5)
        score = np.full(len(y), m.init_value)
        prev = np.mean((y - score) ** 2)
        for tree in m.trees:
            score += m.learning_rate * tree.predict(X)
            cur = np.mean((y - score) ** 2)
            assert cur <= prev + 1e-12
            prev = cur

    def test_learning_rate_direction(self):
        X, y = synth(300, seed=6)
        slow = fit_gradient_boost(X, y, learning_rate=0.01, n_estimators=100, seed=7)
        fast = fit_gradient_boost(X, y, learning_rate=0.1, n_estimators=100, seed=7)
        mse_slow = np.mean((y - slow.predict(X)) ** 2)
        mse_fast = np.mean((y - fast.predict(X)) ** 2)
        assert mse_slow > mse_fast

    def test_subsample_still_learns(self):
        X, y = synth(200, seed=8)
        m = fit_gradient_boost(X, y, n_estimators=50, subsample=0.5, seed=9)
        assert np.mean((y - m.predict(X)) ** 2) < np.var(y)

    def test_bad_learning_rate(self):
        X, y = synth(20, seed=10)
        with pytest.raises(SpecError, match="learning_rate"):
            fit_gradient_boost(X, y, learning_rate=0.0)


class TestClassificationBoosting:
    def test_zero_trees_predicts_base_rate(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(50, 2))
        y = (rng.random(50) < 0.3).astype(float)
        m = fit_gradient_boost(X, y, task="classify", n_estimators=0, seed=0)
        assert np.allclose(m.predict(X), y.mean(), atol=1e-12)

    def test_probabilities_in_unit_interval(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(80, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=80) > 0).astype(float)
        m = fit_gradient_boost(X, y, task="classify", n_estimators=40, seed=1)
        p = m.predict(np.vstack([X, 100 * X]))
        assert p.min() >= 0.0 and p.max() <= 1.0
        assert np.mean((m.predict(X) >= 0.5) == y) > 0.9

    def test_deviance_decreases(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(120, 3))
        y = (X[:, 0] - X[:, 1] > 0).astype(float)
        m0 = fit_gradient_boost(X, y, task="classify", n_estimators=0, seed=2)
        m = fit_gradient_boost(X, y, task="classify", n_estimators=30, seed=2)

        def dev(p):
            p = np.clip(p, 1e-12, 1 - 1e-12)
            return -2 * np.sum(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert dev(m.predict(X)) < dev(m0.predict(X))
