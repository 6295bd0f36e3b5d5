import numpy as np
import pytest

from stackgen.errors import SpecError
from stackgen.learners.trees import (fit_random_forest, resolve_max_features,
                                     resolve_max_samples)


class TestRandomForest:
    def test_constant_target(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 3))
        y = np.full(30, 4.5)
        m = fit_random_forest(X, y, n_estimators=5, seed=1)
        assert np.all(m.predict(X) == 4.5)

    def test_single_full_tree_memorizes(self):
        # no bootstrap, all features, unlimited depth: one tree interpolates
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 4))
        y = rng.normal(size=20)
        m = fit_random_forest(X, y, n_estimators=1, bootstrap=False,
                              max_features=4, seed=2)
        assert np.abs(m.predict(X) - y).max() < 1e-12

    def test_prediction_is_mean_of_trees(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        m = fit_random_forest(X, y, n_estimators=7, seed=3)
        manual = np.mean([t.predict(X) for t in m.trees], axis=0)
        assert np.allclose(m.predict(X), manual, atol=1e-12)

    def test_order_invariance_of_mean(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(25, 2))
        y = rng.normal(size=25)
        m = fit_random_forest(X, y, n_estimators=6, seed=4)
        base = m.predict(X)
        m.trees = list(reversed(m.trees))
        assert np.allclose(m.predict(X), base, atol=1e-12)

    def test_depth_one_stump_on_binary_predictor(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([2.0, 2.0, 5.0, 5.0])
        m = fit_random_forest(X, y, n_estimators=1, bootstrap=False,
                              max_depth=1, seed=5)
        assert np.abs(m.predict(X) - y).max() == 0.0

    def test_min_samples_leaf_too_large(self):
        with pytest.raises(SpecError, match="min_samples_leaf"):
            fit_random_forest(np.ones((5, 1)), np.arange(5.0),
                              min_samples_leaf=5)

    def test_classification_returns_probabilities(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(60, 4))
        y = (X[:, 0] > 0).astype(float)
        m = fit_random_forest(X, y, task="classify", n_estimators=15, seed=6)
        p = m.predict(X)
        assert p.min() >= 0.0 and p.max() <= 1.0
        assert np.mean((p >= 0.5) == y) > 0.9

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        a = fit_random_forest(X, y, n_estimators=4, seed=7)
        b = fit_random_forest(X, y, n_estimators=4, seed=7)
        assert np.array_equal(a.predict(X), b.predict(X))


class TestOptionResolution:
    def test_max_features(self):
        assert resolve_max_features(None, 9, "regress") == 9
        assert resolve_max_features(None, 9, "classify") == 3
        assert resolve_max_features("sqrt", 10, "regress") == 3
        assert resolve_max_features(4, 9, "regress") == 4
        assert resolve_max_features(0.5, 9, "regress") == 4
        assert resolve_max_features(50, 9, "regress") == 9

    def test_max_samples_fraction_vs_count(self):
        assert resolve_max_samples(None, 100) == 100
        assert resolve_max_samples(0.5, 100) == 50
        assert resolve_max_samples(1, 100) == 100  # <= 1 is a fraction
        assert resolve_max_samples(30, 100) == 30
        with pytest.raises(SpecError):
            resolve_max_samples(-1, 100)
