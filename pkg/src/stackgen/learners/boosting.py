"""Gradient-boosted trees.

Regression is squared-error boosting: start from the outcome mean, fit each
tree to the current residuals, and add learning_rate times its prediction.
Classification boosts the binomial deviance on the log-odds scale: trees are
fit to y - p with per-leaf Newton steps sum(y-p)/sum(p(1-p)), and the final
score passes through the logistic transform. subsample < 1 draws a fresh
without-replacement row fraction for every tree.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels as kernels
from .._rng import SplitMix64, derive_seed
from ..errors import SpecError
from .linear import sigmoid
from .trees import Tree


class BoostModel:
    kind = "boost"

    def __init__(self, init_value, trees, learning_rate, link):
        self.init_value = float(init_value)
        self.trees = trees
        self.learning_rate = float(learning_rate)
        self.link = link

    def decision(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        score = np.full(X.shape[0], self.init_value)
        for tree in self.trees:
            score += self.learning_rate * tree.predict(X)
        return score

    def predict(self, X):
        score = self.decision(X)
        return sigmoid(score) if self.link == "logistic" else score

    def to_dict(self):
        return {"kind": self.kind, "init_value": self.init_value,
                "learning_rate": self.learning_rate, "link": self.link,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["init_value"], [Tree.from_dict(t) for t in d["trees"]],
                   d["learning_rate"], d["link"])


def _subsample_rows(n, subsample, rng):
    if subsample >= 1.0:
        return np.arange(n, dtype=np.int64)
    m = max(1, int(round(subsample * n)))
    arr = list(range(n))
    for i in range(m):
        j = i + rng.randint(n - i)
        arr[i], arr[j] = arr[j], arr[i]
    return np.array(sorted(arr[:m]), dtype=np.int64)


def fit_gradient_boost(X, y, task="regress", learning_rate=0.1,
                       n_estimators=100, max_depth=3, subsample=1.0,
                       min_samples_leaf=1, seed=0) -> BoostModel:
    if learning_rate <= 0.0:
        raise SpecError(f"learning_rate must be positive, got {learning_rate}")
    if not 0.0 < subsample <= 1.0:
        raise SpecError(f"subsample must lie in (0, 1], got {subsample}")
    if n_estimators < 0:
        raise SpecError("n_estimators must be >= 0")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    md = -1 if max_depth is None else int(max_depth)

    if task == "classify":
        pbar = float(np.clip(np.mean(y), 1e-12, 1.0 - 1e-12))
        f0 = float(np.log(pbar / (1.0 - pbar)))
        link = "logistic"
    else:
        f0 = float(np.mean(y))
        link = "identity"

    score = np.full(n, f0)
    ones = np.ones(n)
    trees = []
    for t in range(n_estimators):
        tree_seed = derive_seed(seed, t)
        rows = _subsample_rows(n, subsample, SplitMix64(derive_seed(tree_seed, 0)))
        if task == "classify":
            p = sigmoid(score)
            grad = y - p
            hess = p * (1.0 - p)
        else:
            grad = y - score
            hess = ones
        nodes = kernels.build_tree(X, grad, hess, rows,
                                   kernels.CRITERION_VARIANCE, md,
                                   min_samples_leaf, X.shape[1],
                                   derive_seed(tree_seed, 1))
        tree = Tree(*nodes)
        trees.append(tree)
        score += learning_rate * tree.predict(X)
    return BoostModel(f0, trees, learning_rate, link)
