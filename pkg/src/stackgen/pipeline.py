"""Per-learner preprocessing chains: fit statistics on the training matrix,
apply them anywhere.

Step ids: stdscaler, nostdscaler (a flag, see below), minmaxscaler, onehot,
medianimputer, knnimputer(k), poly2, poly3, interact. The sparse-preserving
ids (sparse, stdscaler0) are rejected: this package stores matrices densely.

`nostdscaler` carries no transform of its own; it suppresses the standard
scaler that regularized-regression learners otherwise prepend by default.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import PipelineError

_UNSUPPORTED = ("sparse", "stdscaler0")
_IMPUTERS = ("medianimputer", "knnimputer")
_KNOWN = ("stdscaler", "nostdscaler", "minmaxscaler", "onehot",
          "medianimputer", "knnimputer", "poly2", "poly3", "interact")

KNN_DEFAULT_K = 5


@dataclass(frozen=True)
class PipelineSpec:
    """Ordered preprocessing steps; each is (step id, params dict)."""

    steps: tuple = ()

    def __post_init__(self):
        norm = []
        for step in self.steps:
            if isinstance(step, str):
                step = (step, {})
            name, params = step
            if name in _UNSUPPORTED:
                raise PipelineError(f"unsupported: dense backend only ({name})")
            if name not in _KNOWN:
                raise PipelineError(f"unknown pipeline step {name!r}")
            norm.append((name, dict(params)))
        object.__setattr__(self, "steps", tuple((n, tuple(sorted(p.items())))
                                                for n, p in norm))

    @property
    def suppresses_default_scaler(self) -> bool:
        return any(name == "nostdscaler" for name, _ in self.steps)

    def with_prepended(self, name: str) -> "PipelineSpec":
        return PipelineSpec(((name, {}),) + self.steps)

    def describe(self) -> str:
        parts = []
        for name, params in self.steps:
            kv = dict(params)
            parts.append(f"{name}({kv['k']})" if name == "knnimputer" and "k" in kv
                         else name)
        return " ".join(parts)


def parse_pipeline(text: str) -> PipelineSpec:
    """Parse a space-separated step string, e.g. 'medianimputer poly2'."""
    steps = []
    for token in text.split():
        if "(" in token:
            if not token.endswith(")"):
                raise PipelineError(f"malformed pipeline step {token!r}")
            name, arg = token[:-1].split("(", 1)
            if name != "knnimputer":
                raise PipelineError(f"step {name!r} takes no argument")
            try:
                k = int(arg)
            except ValueError:
                raise PipelineError(f"knnimputer needs an integer k, got {arg!r}") from None
            if k < 1:
                raise PipelineError("knnimputer k must be >= 1")
            steps.append((name, {"k": k}))
        else:
            steps.append((token, {}))
    return PipelineSpec(tuple(steps))


@dataclass
class FittedPipeline:
    """Training statistics for every step plus the input/output column counts."""

    spec: PipelineSpec
    states: list
    p_in: int
    p_out: int

    def to_dict(self):
        return {"steps": [list(s) for s in self.spec.steps],
                "states": self.states, "p_in": self.p_in, "p_out": self.p_out}

    @classmethod
    def from_dict(cls, d):
        spec = PipelineSpec(tuple((n, dict(p)) for n, p in d["steps"]))
        return cls(spec, d["states"], d["p_in"], d["p_out"])


def _check_no_nan(X, step):
    if np.isnan(X).any():
        raise PipelineError(
            f"NaN reached non-imputer step {step!r}; put an imputer first")


def _fit_step(name, params, X):
    """Compute one step's training statistics. Returns a JSON-able state."""
    params = dict(params)
    if name == "nostdscaler":
        return None
    if name not in _IMPUTERS:
        _check_no_nan(X, name)
    if name == "stdscaler":
        mean = X.mean(axis=0)
        sd = np.sqrt(((X - mean) ** 2).mean(axis=0))
        # columns that are constant up to rounding pass through untouched
        const = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
        if const.any():
            warnings.warn("stdscaler: zero-variance column(s) "
                          f"{np.flatnonzero(const).tolist()} left unscaled")
        return {"mean": mean.tolist(), "sd": sd.tolist(),
                "const": const.tolist()}
    if name == "minmaxscaler":
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        scale = hi - lo
        scale[scale == 0.0] = 1.0
        return {"lo": lo.tolist(), "scale": scale.tolist()}
    if name == "onehot":
        levels = []
        for j in range(X.shape[1]):
            levels.append(sorted(set(X[:, j].tolist())))
        return {"levels": levels}
    if name == "medianimputer":
        medians = []
        for j in range(X.shape[1]):
            col = X[:, j]
            obs = col[~np.isnan(col)]
            if obs.size == 0:
                raise PipelineError(f"medianimputer: column {j} is entirely missing")
            medians.append(float(np.median(obs)))
        return {"medians": medians}
    if name == "knnimputer":
        k = params.get("k", KNN_DEFAULT_K)
        if k >= X.shape[0]:
            raise PipelineError(
                f"knnimputer: k={k} must be smaller than the {X.shape[0]} training rows")
        for j in range(X.shape[1]):
            if np.isnan(X[:, j]).all():
                raise PipelineError(f"knnimputer: column {j} is entirely missing")
        return {"k": k, "ref": X.copy().tolist()}
    if name in ("poly2", "poly3", "interact"):
        return {"p": X.shape[1]}
    raise PipelineError(f"unknown pipeline step {name!r}")


def _apply_step(name, params, state, X):
    if name == "nostdscaler":
        return X
    if name not in _IMPUTERS:
        _check_no_nan(X, name)
    if name == "stdscaler":
        mean = np.asarray(state["mean"])
        sd = np.asarray(state["sd"])
        const = np.asarray(state["const"], dtype=bool)
        out = X.copy()
        keep = ~const
        out[:, keep] = (X[:, keep] - mean[keep]) / sd[keep]
        return out
    if name == "minmaxscaler":
        lo = np.asarray(state["lo"])
        scale = np.asarray(state["scale"])
        return (X - lo) / scale
    if name == "onehot":
        blocks = []
        unseen = 0
        for j, levels in enumerate(state["levels"]):
            block = np.zeros((X.shape[0], len(levels)))
            for li, lv in enumerate(levels):
                block[:, li] = X[:, j] == lv
            unseen += int((block.sum(axis=1) == 0).sum())
            blocks.append(block)
        if unseen:
            warnings.warn(f"onehot: {unseen} cell(s) with categories unseen in "
                          "training mapped to all-zero rows")
        return np.hstack(blocks)
    if name == "medianimputer":
        medians = np.asarray(state["medians"])
        out = X.copy()
        for j in range(out.shape[1]):
            out[np.isnan(out[:, j]), j] = medians[j]
        return out
    if name == "knnimputer":
        ref = np.asarray(state["ref"])
        k = state["k"]
        out = X.copy()
        for i in range(out.shape[0]):
            if np.isnan(out[i]).any():
                out[i] = knn_impute(ref, out[i], k)
        return out
    if name in ("poly2", "poly3", "interact"):
        p = X.shape[1]
        cols = [X]
        if name == "interact":
            for i in range(p):
                for j in range(i + 1, p):
                    cols.append((X[:, i] * X[:, j])[:, None])
        else:
            for i in range(p):
                for j in range(i, p):
                    cols.append((X[:, i] * X[:, j])[:, None])
            if name == "poly3":
                for i in range(p):
                    for j in range(i, p):
                        for kk in range(j, p):
                            cols.append((X[:, i] * X[:, j] * X[:, kk])[:, None])
        return np.hstack(cols)
    raise PipelineError(f"unknown pipeline step {name!r}")


def fit_transform(spec: PipelineSpec, X_train) -> tuple[FittedPipeline, np.ndarray]:
    """Fit every step on the training matrix, in order, and transform it."""
    X = np.asarray(X_train, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise PipelineError("training matrix must be 2-dimensional and nonempty")
    p_in = X.shape[1]
    states = []
    for name, params in spec.steps:
        state = _fit_step(name, params, X)
        states.append(state)
        X = _apply_step(name, dict(params), state, X)
    return FittedPipeline(spec, states, p_in, X.shape[1]), X


def transform(fitted: FittedPipeline, X) -> np.ndarray:
    """Apply stored training statistics; never re-estimates."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fitted.p_in:
        raise PipelineError(
            f"expected {fitted.p_in} columns, got {X.shape[1] if X.ndim == 2 else '?'}")
    for (name, params), state in zip(fitted.spec.steps, fitted.states):
        X = _apply_step(name, dict(params), state, X)
    return X


def knn_impute(Xref, x, k):
    """Fill the missing entries of one row from its k nearest reference rows.

    Distance is Euclidean over the coordinates observed in both rows,
    rescaled by sqrt(p / p_shared); ties break toward the lower row index.
    Each missing entry is the mean of that column over the selected
    neighbors that have it observed (falling back to the overall column
    mean when none do).
    """
    Xref = np.asarray(Xref, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).copy()
    n, p = Xref.shape
    obs = ~np.isnan(x)
    ref_obs = ~np.isnan(Xref)
    shared = ref_obs & obs[None, :]
    n_shared = shared.sum(axis=1)
    diff = np.where(shared, Xref - x[None, :], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.sqrt((diff ** 2).sum(axis=1) * p / n_shared)
    dist[n_shared == 0] = np.inf
    if not np.isfinite(dist).any():
        raise PipelineError("knn imputation: no reference row shares any "
                            "observed coordinate with the target row")
    order = np.lexsort((np.arange(n), dist))
    order = order[np.isfinite(dist[order])]
    for j in np.flatnonzero(~obs):
        # donors: the k nearest rows that have column j observed
        cand = order[ref_obs[order, j]][:k]
        if cand.size == 0:
            donors = Xref[ref_obs[:, j], j]
        else:
            donors = Xref[cand, j]
        x[j] = float(donors.mean())
    return x
