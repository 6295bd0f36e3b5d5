"""Random forests over the CART kernel.

Each tree trains on a bootstrap draw; every split considers a fresh uniform
draw of candidate columns. Split quality is child-weighted variance for
regression and Gini impurity for classification; prediction is the mean of
tree predictions (leaf class-1 fractions for classification, so the output
is already a probability).
"""

from __future__ import annotations

import math

import numpy as np

from .. import _kernels as kernels
from .._rng import SplitMix64, derive_seed
from ..errors import SpecError
from .linear import sigmoid


class Tree:
    """One fitted CART tree as flat node arrays."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    def predict(self, X):
        return kernels.predict_tree(self.feature, self.threshold, self.left,
                                    self.right, self.value, X)

    def to_dict(self):
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "value": self.value}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], dtype=np.int32),
                   np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int32),
                   np.asarray(d["right"], dtype=np.int32),
                   np.asarray(d["value"], dtype=np.float64))


def resolve_max_features(max_features, p, task):
    """None -> all columns (regression) or floor(sqrt(p)) (classification);
    'sqrt' -> floor(sqrt(p)); int -> count; 0<f<1 -> fraction of columns."""
    if max_features is None:
        return p if task == "regress" else max(1, int(math.isqrt(p)))
    if max_features == "sqrt":
        return max(1, int(math.isqrt(p)))
    if isinstance(max_features, float) and 0.0 < max_features < 1.0:
        return max(1, int(max_features * p))
    mf = int(max_features)
    if mf < 1:
        raise SpecError(f"max_features must be >= 1, got {max_features}")
    return min(mf, p)


def resolve_max_samples(max_samples, n):
    """None -> n; values <= 1 are fractions, > 1 are counts."""
    if max_samples is None:
        return n
    if max_samples <= 0:
        raise SpecError(f"max_samples must be positive, got {max_samples}")
    if max_samples <= 1:
        return max(1, int(round(max_samples * n)))
    return int(max_samples)


class ForestModel:
    kind = "forest"

    def __init__(self, trees, task):
        self.trees = trees
        self.task = task

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def to_dict(self):
        return {"kind": self.kind, "task": self.task,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls([Tree.from_dict(t) for t in d["trees"]], d["task"])


def fit_random_forest(X, y, task="regress", n_estimators=100, max_depth=None,
                      min_samples_leaf=1, max_features=None, max_samples=None,
                      bootstrap=True, seed=0) -> ForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if min_samples_leaf >= n:
        raise SpecError(f"min_samples_leaf={min_samples_leaf} must be below "
                        f"the {n} training rows")
    if n_estimators < 1:
        raise SpecError("random forest needs at least 1 tree")
    mf = resolve_max_features(max_features, p, task)
    ms = resolve_max_samples(max_samples, n)
    md = -1 if max_depth is None else int(max_depth)
    crit = kernels.CRITERION_VARIANCE if task == "regress" else kernels.CRITERION_GINI
    hess = np.ones(n)
    trees = []
    for t in range(n_estimators):
        tree_seed = derive_seed(seed, t)
        if bootstrap:
            rng = SplitMix64(derive_seed(tree_seed, 0))
            rows = np.array([rng.randint(n) for _ in range(ms)], dtype=np.int64)
        else:
            rows = np.arange(n, dtype=np.int64)
        nodes = kernels.build_tree(X, y, hess, rows, crit, md,
                                   min_samples_leaf, mf,
                                   derive_seed(tree_seed, 1))
        trees.append(Tree(*nodes))
    return ForestModel(trees, task)
