"""Stacking orchestration: cross-fitting, final-learner fitting, full-sample
refits, voting, prediction, and model persistence.

The algorithm: split the training rows into K folds; for every base learner
j and fold k, fit j on the K-1 complementary folds and predict fold k,
filling column j of the cross-fitted matrix Z row by row; fit the final
estimator to (Z, y); refit every learner on all training rows for
prediction. All randomness flows from one master seed through per-task
derived streams, so njobs only changes the schedule, never the result.
"""

from __future__ import annotations

import os
import random
import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import learners as learners_mod
from ._rng import derive_seed
from ._serialize import dump_model, load_payload
from .data import (CLASSIFY, REGRESS, Dataset, FoldAssignment, HoldoutMask,
                   assign_folds, folds_from_column)
from .errors import DataError, FitError, SpecError
from .learners import FittedLearner, LearnerSpec
from .optim import FINAL_ESTIMATORS, FinalFit, solve_final

# stream indices under the master seed
_STREAM_FOLDS = 1
_STREAM_TASK = 2
_STREAM_FINAL = 3

SEED_DRAW_BOUND = 10 ** 8  # policy -1 draws a master seed in [0, 1e8]


@dataclass(frozen=True)
class StackSpec:
    """Everything that defines one stacking run."""

    learners: tuple
    task: str = REGRESS
    finalest: str = "nnls1"
    folds: int = 5
    foldvar: tuple | None = None
    bfolds: int = 5
    seed: int = -1
    njobs: int = 0
    voting: bool = False
    voteweights: tuple | None = None

    def __post_init__(self):
        specs = tuple(self.learners)
        if not specs:
            raise SpecError("need at least one base learner")
        for ls in specs:
            if not isinstance(ls, LearnerSpec):
                raise SpecError("learners must be LearnerSpec instances")
            if ls.task != self.task:
                raise SpecError(f"learner {ls.method!r} has task {ls.task!r} "
                                f"but the stack is {self.task!r}")
        # base learners with internal CV inherit bfolds unless cv was given
        normalized = []
        for ls in specs:
            if ls.method in ("lassocv", "ridgecv", "elasticcv") \
                    and "cv" not in ls.options:
                opts = dict(ls.options)
                opts["cv"] = self.bfolds
                ls = LearnerSpec(ls.method, ls.task, opts, ls.pipeline, ls.xvars)
            normalized.append(ls)
        object.__setattr__(self, "learners", tuple(normalized))
        if self.task not in (REGRESS, CLASSIFY):
            raise SpecError(f"unknown task {self.task!r}")
        if self.finalest not in FINAL_ESTIMATORS or self.finalest == "voting":
            raise SpecError(f"unknown final estimator {self.finalest!r}")
        if self.folds < 2:
            raise SpecError("folds must be >= 2")
        if self.bfolds < 2:
            raise SpecError("bfolds must be >= 2")
        if self.seed < -1:
            raise SpecError("seed must be -1 (derive), 0 (entropy), or positive")
        if self.voting and len(specs) < 2:
            raise SpecError("voting needs at least 2 base learners")
        if self.voteweights is not None:
            if not self.voting:
                raise SpecError("voteweights requires voting")
            vw = tuple(float(v) for v in self.voteweights)
            if len(vw) != len(specs) - 1:
                raise SpecError("voteweights must list J-1 weights (the last "
                                "is computed)")
            if any(v <= 0 for v in vw):
                raise SpecError("voteweights must be positive")
            if sum(vw) >= 1.0:
                raise SpecError("voteweights must sum to less than 1 so the "
                                "computed last weight stays positive")
            object.__setattr__(self, "voteweights", vw)
        if self.foldvar is not None:
            object.__setattr__(self, "foldvar", tuple(self.foldvar))

    @property
    def J(self) -> int:
        return len(self.learners)

    def vote_weight_vector(self) -> np.ndarray:
        if self.voteweights is None:
            return np.full(self.J, 1.0 / self.J)
        vw = np.asarray(self.voteweights)
        return np.append(vw, 1.0 - vw.sum())

    def to_dict(self):
        return {"learners": [ls.to_dict() for ls in self.learners],
                "task": self.task, "finalest": self.finalest,
                "folds": self.folds,
                "foldvar": list(self.foldvar) if self.foldvar is not None else None,
                "bfolds": self.bfolds, "seed": self.seed, "njobs": self.njobs,
                "voting": self.voting,
                "voteweights": (list(self.voteweights)
                                if self.voteweights is not None else None)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(LearnerSpec.from_dict(ls) for ls in d["learners"]),
                   d["task"], d["finalest"], d["folds"],
                   tuple(d["foldvar"]) if d["foldvar"] is not None else None,
                   d["bfolds"], d["seed"], d["njobs"], d["voting"],
                   tuple(d["voteweights"]) if d["voteweights"] is not None else None)


@dataclass
class StackModel:
    """Fitted stacking artifact."""

    spec: StackSpec
    master_seed: int
    learners: list
    Z: np.ndarray
    final: FinalFit
    folds: FoldAssignment
    train_row_ids: np.ndarray
    task: str
    meta: dict = field(default_factory=dict)

    @property
    def J(self) -> int:
        return len(self.learners)

    def combine(self, P: np.ndarray) -> np.ndarray:
        """Apply the fitted combination rule to an (n, J) base-prediction
        matrix. Voting classification uses the weighted share of learners
        voting class 1 at threshold 0.5."""
        if self.J == 1:
            return P[:, 0]
        if self.spec.voting and self.task == CLASSIFY:
            votes = (P > 0.5).astype(np.float64)
            return votes @ self.final.weights
        return self.final.combine(P)

    def method_labels(self) -> list:
        return [ls.method for ls in self.spec.learners]


def resolve_master_seed(seed_policy: int) -> int:
    """-1: one draw from the stdlib global generator in [0, 1e8];
    0: OS entropy; positive: the value itself."""
    if seed_policy == -1:
        return random.randrange(SEED_DRAW_BOUND + 1)
    if seed_policy == 0:
        return secrets.randbits(62)
    if seed_policy > 0:
        return seed_policy
    raise SpecError("seed must be -1, 0, or a positive integer")


def _worker_count(njobs: int) -> int:
    if njobs in (0, 1):
        return 1
    cpus = os.cpu_count() or 1
    if njobs == -1:
        return max(1, cpus)
    if njobs == -2:
        return max(1, cpus - 1)
    if njobs < 0:
        raise SpecError("njobs must be >= -2")
    return njobs


def _run_tasks(tasks, fn, njobs):
    """Run fn over tasks, sequentially or on a thread pool. Results are
    position-addressed so the schedule cannot affect anything downstream."""
    workers = _worker_count(njobs)
    if workers == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _fit_one(spec_j, X, y, colnames, seed, label):
    try:
        return learners_mod.fit(spec_j, X, y, seed=seed, colnames=colnames)
    except Exception as exc:
        raise FitError(f"{label}: {exc}") from exc


def cross_fit(spec: StackSpec, data: Dataset, folds: FoldAssignment,
              master_seed: int) -> np.ndarray:
    """The cross-fitted prediction matrix Z: row i of column j comes from
    learner j trained without fold k(i)."""
    X, y = data.X, data.y
    n = data.n
    Z = np.empty((n, spec.J))
    tasks = [(j, k) for j in range(spec.J) for k in range(1, folds.K + 1)]

    def run(task):
        j, k = task
        train = folds.fold != k
        label = (f"learner {j + 1} ({spec.learners[j].method}) failed on "
                 f"fold {k}")
        fitted = _fit_one(spec.learners[j], X[train], y[train], data.colnames,
                          derive_seed(master_seed, _STREAM_TASK, j, k), label)
        try:
            return fitted.predict(X[~train])
        except Exception as exc:
            raise FitError(f"{label}: {exc}") from exc

    results = _run_tasks(tasks, run, spec.njobs)
    for (j, k), pred in zip(tasks, results):
        Z[folds.fold == k, j] = pred
    return Z


def fit_stack(spec: StackSpec, data: Dataset, mask: HoldoutMask | None = None,
              meta: dict | None = None,
              master_seed: int | None = None) -> StackModel:
    """Run the full stacking procedure on the estimation rows of `data`.

    `master_seed` overrides the spec's seed policy when the caller has
    already resolved one (the CLI does, so that the derived holdout split
    and the fit share a single master seed).
    """
    if mask is not None:
        if mask.in_train.shape[0] != data.n:
            raise DataError("holdout mask length does not match the data")
        train_ids = np.flatnonzero(mask.in_train)
    else:
        train_ids = np.arange(data.n)
    tdata = data.subset(train_ids)

    if master_seed is None:
        master_seed = resolve_master_seed(spec.seed)

    if spec.foldvar is not None:
        fv = np.asarray(spec.foldvar)
        if fv.shape[0] == data.n:
            fv = fv[train_ids]
        elif fv.shape[0] != tdata.n:
            raise DataError("fold column length matches neither the data nor "
                            "the estimation sample")
        folds = folds_from_column(fv)
    else:
        folds = assign_folds(tdata.n, spec.folds,
                             derive_seed(master_seed, _STREAM_FOLDS))

    Z = cross_fit(spec, tdata, folds, master_seed)

    if spec.voting:
        w = spec.vote_weight_vector()
        final = FinalFit(w, 0.0, "voting",
                         float(np.sum((tdata.y - Z @ w) ** 2)))
    elif spec.J == 1:
        final = FinalFit(np.ones(1), 0.0, spec.finalest,
                         float(np.sum((tdata.y - Z[:, 0]) ** 2)))
    else:
        final = solve_final(spec.finalest, Z, tdata.y, task=spec.task,
                            bfolds=spec.bfolds,
                            seed=derive_seed(master_seed, _STREAM_FINAL))

    def refit(j):
        label = f"learner {j + 1} ({spec.learners[j].method}) failed on full sample"
        return _fit_one(spec.learners[j], tdata.X, tdata.y, tdata.colnames,
                        derive_seed(master_seed, _STREAM_TASK, j, 0), label)

    fitted = _run_tasks(list(range(spec.J)), refit, spec.njobs)

    return StackModel(spec, master_seed, fitted, Z, final, folds,
                      train_ids.astype(np.int64), spec.task,
                      dict(meta or {}))


def predict_base(model: StackModel, X=None, source: str = "refit",
                 row_ids=None) -> np.ndarray:
    """Per-learner predictions, columns in declaration order.

    source="refit": full-sample learners applied to X.
    source="cvalid": the stored cross-fitted matrix; only training rows
    exist, so X is ignored and `row_ids` (original row ids) must all belong
    to the training sample.
    """
    if source == "refit":
        if X is None:
            raise SpecError("refit predictions need a predictor matrix")
        X = np.asarray(X, dtype=np.float64)
        P = np.empty((X.shape[0], model.J))
        for j, fl in enumerate(model.learners):
            P[:, j] = fl.predict(X)
        return P
    if source == "cvalid":
        if row_ids is None:
            if X is not None and np.asarray(X).shape[0] != model.Z.shape[0]:
                raise DataError("cross-validated predictions exist only for "
                                "the training sample")
            return model.Z.copy()
        row_ids = np.asarray(row_ids)
        pos = {rid: i for i, rid in enumerate(model.train_row_ids.tolist())}
        missing = [r for r in row_ids.tolist() if r not in pos]
        if missing:
            raise DataError(f"cross-validated predictions requested for rows "
                            f"outside the training sample (e.g. row {missing[0]})")
        return model.Z[[pos[r] for r in row_ids.tolist()]]
    raise SpecError(f"unknown prediction source {source!r}")


def predict_stack(model: StackModel, X, kind: str = "xb") -> np.ndarray:
    """Stacked predictions for new rows. kind="pr" (classification only)
    clips to [0, 1] for reporting; kind="xb" is the raw combination."""
    if kind not in ("xb", "pr"):
        raise SpecError(f"unknown prediction kind {kind!r}")
    if kind == "pr" and model.task != CLASSIFY:
        raise SpecError("kind='pr' is only available for classification")
    out = model.combine(predict_base(model, X, source="refit"))
    if kind == "pr":
        out = np.clip(out, 0.0, 1.0)
    return out


def save_model(model: StackModel, path: str) -> None:
    """Write the versioned model file (see docs/MODEL_FORMAT.md).

    The spec echo normalizes njobs to 0: the parallel schedule does not
    affect the fitted model, so it must not affect the file bytes either.
    """
    payload = {
        "spec": {**model.spec.to_dict(), "njobs": 0},
        "master_seed": model.master_seed,
        "task": model.task,
        "learners": [fl.to_dict() for fl in model.learners],
        "Z": model.Z,
        "final": model.final.to_dict(),
        "folds": {"fold": model.folds.fold, "K": model.folds.K},
        "train_row_ids": model.train_row_ids,
        "meta": model.meta,
    }
    dump_model(payload, path)


def load_model(path: str) -> StackModel:
    payload = load_payload(path)
    spec = StackSpec.from_dict(payload["spec"])
    fitted = [FittedLearner.from_dict(d) for d in payload["learners"]]
    folds = FoldAssignment(payload["folds"]["fold"], payload["folds"]["K"])
    return StackModel(spec, payload["master_seed"], fitted, payload["Z"],
                      FinalFit.from_dict(payload["final"]), folds,
                      np.asarray(payload["train_row_ids"], dtype=np.int64),
                      payload["task"], payload.get("meta") or {})
