"""Tabular data loading, train/holdout partitioning, and fold assignment."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._rng import SplitMix64
from .errors import DataError

REGRESS = "regress"
CLASSIFY = "classify"

_MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class Dataset:
    """Dense predictor matrix, outcome vector, column names, and task kind.

    Immutable after construction; safe to share across parallel fit tasks.
    NaN predictors are allowed at load time (an imputer pipeline may fix
    them later) but a NaN outcome never is.
    """

    X: np.ndarray
    y: np.ndarray
    colnames: tuple[str, ...]
    task: str = REGRESS

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "colnames", tuple(self.colnames))
        if X.ndim != 2:
            raise DataError("predictor matrix must be 2-dimensional")
        n, p = X.shape
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if p < 1:
            raise DataError("need at least 1 predictor column")
        if y.shape != (n,):
            raise DataError(f"outcome length {y.shape} does not match {n} rows")
        if len(self.colnames) != p:
            raise DataError("colnames length does not match predictor count")
        if self.task not in (REGRESS, CLASSIFY):
            raise DataError(f"unknown task {self.task!r}")
        if np.isnan(y).any():
            raise DataError("outcome contains missing values")
        if self.task == CLASSIFY:
            vals = np.unique(y)
            if not np.isin(vals, (0.0, 1.0)).all():
                raise DataError("classification outcome must contain only 0 and 1")
            if vals.size != 2:
                raise DataError("classification outcome must contain both classes")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_indices(self, names) -> np.ndarray:
        """Indices of the named predictor columns, in the given order."""
        lookup = {c: i for i, c in enumerate(self.colnames)}
        out = []
        for name in names:
            if name not in lookup:
                raise DataError(f"missing column {name!r}")
            out.append(lookup[name])
        return np.asarray(out, dtype=np.int64)

    def subset(self, row_mask_or_idx) -> "Dataset":
        """Row subset as a new Dataset (used for estimation-sample selection)."""
        return Dataset(self.X[row_mask_or_idx], self.y[row_mask_or_idx],
                       self.colnames, self.task)


@dataclass(frozen=True)
class FoldAssignment:
    """Per-observation fold ids in 1..K."""

    fold: np.ndarray
    K: int

    def __post_init__(self):
        fold = np.asarray(self.fold, dtype=np.int64)
        object.__setattr__(self, "fold", fold)
        if self.K < 2:
            raise DataError("need at least 2 folds")
        ids = np.unique(fold)
        if ids.min() < 1 or ids.max() > self.K:
            raise DataError("fold ids must lie in 1..K")
        if ids.size != self.K:
            raise DataError("every fold id in 1..K must occur at least once")

    @property
    def n(self) -> int:
        return self.fold.shape[0]


@dataclass(frozen=True)
class HoldoutMask:
    """Boolean in-training flags over all loaded rows."""

    in_train: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.in_train, dtype=bool)
        object.__setattr__(self, "in_train", mask)
        if int(mask.sum()) < 2:
            raise DataError("need at least 2 training rows")

    @property
    def n_train(self) -> int:
        return int(self.in_train.sum())

    @property
    def n_holdout(self) -> int:
        return int((~self.in_train).sum())


def load_csv(path, outcome, predictors=None, task=REGRESS) -> Dataset:
    """Load an RFC-4180-style CSV (header required, '.' decimal separator).

    Empty cells and "NA" parse as NaN. Predictors default to every non-outcome
    column in file order.
    """
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    if outcome not in header:
        raise DataError(f"missing column {outcome!r}")
    if predictors is None:
        predictors = [c for c in header if c != outcome]
    if not predictors:
        raise DataError("no predictor columns")
    col_pos = {}
    for name in [outcome, *predictors]:
        if name not in header:
            raise DataError(f"missing column {name!r}")
        col_pos[name] = header.index(name)
    if not rows:
        raise DataError(f"{path}: zero data rows")

    def parse(cell, rownum, colname):
        cell = cell.strip()
        if cell in _MISSING_TOKENS:
            return math.nan
        try:
            return float(cell)
        except ValueError:
            raise DataError(
                f"{path}: non-numeric cell {cell!r} in column {colname!r}, "
                f"row {rownum}") from None

    n = len(rows)
    y = np.empty(n)
    X = np.empty((n, len(predictors)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, "
                            f"expected {len(header)}")
        y[i] = parse(row[col_pos[outcome]], i + 2, outcome)
        for j, name in enumerate(predictors):
            X[i, j] = parse(row[col_pos[name]], i + 2, name)
    return Dataset(X, y, tuple(predictors), task)


def assign_folds(n, K, seed) -> FoldAssignment:
    """Deterministic balanced folds: Fisher-Yates shuffle, deal round-robin."""
    if K < 2:
        raise DataError(f"need at least 2 folds, got {K}")
    if K > n:
        raise DataError(f"cannot split {n} rows into {K} folds")
    order = list(range(n))
    SplitMix64(seed).shuffle(order)
    fold = np.empty(n, dtype=np.int64)
    for pos, row in enumerate(order):
        fold[row] = pos % K + 1
    return FoldAssignment(fold, K)


def folds_from_column(values) -> FoldAssignment:
    """User-supplied fold column; ids are relabeled to 1..K preserving groups."""
    values = np.asarray(values, dtype=np.float64)
    if np.isnan(values).any() or (values != np.round(values)).any():
        raise DataError("fold column must contain integers")
    ints = values.astype(np.int64)
    distinct = np.unique(ints)
    if distinct.size < 2:
        raise DataError("fold column defines a single fold")
    relabel = {v: i + 1 for i, v in enumerate(distinct.tolist())}
    fold = np.array([relabel[v] for v in ints.tolist()], dtype=np.int64)
    return FoldAssignment(fold, distinct.size)


def split_holdout(n, train_fraction, seed) -> HoldoutMask:
    """Assign each row to training with probability train_fraction.

    Per-row independent draws under the seeded generator (the split is
    approximately, not exactly, n*train_fraction rows).
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    rng = SplitMix64(seed)
    mask = np.array([rng.uniform() < train_fraction for _ in range(n)])
    if mask.sum() < 2 or (~mask).sum() < 1:
        raise DataError("holdout split left a side empty; adjust fraction or seed")
    return HoldoutMask(mask)
