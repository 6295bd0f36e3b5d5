"""Pure-Python/numpy kernels: CART tree building, tree prediction, and the
elastic-net coordinate-descent sweep.

This is the fallback backend and the reference for the compiled one. Tree
building is specified to the last bit: prefix sums are sequential (numpy's
``cumsum`` accumulates left to right), node rows keep their incoming order
when partitioned, within-node sorts are stable, and the feature subsample
stream is the shared splitmix64 generator. The compiled backend reproduces
these choices exactly, so both backends grow identical trees from identical
seeds. Coordinate descent agrees across backends only to rounding (BLAS dot
products associate differently than a scalar loop).
"""

from __future__ import annotations

import numpy as np

from .._rng import SplitMix64

BACKEND = "python"

CRITERION_VARIANCE = 0
CRITERION_GINI = 1

_NO_FEATURE = -1


def build_tree(X, target, hess, rows, criterion, max_depth, min_samples_leaf,
               max_features, seed):
    """Grow one CART tree depth-first and return it as flat node arrays.

    X : (n, p) float64, the full training matrix; `rows` indexes into it and
        may contain duplicates (bootstrap).
    target : per-row fit target (y, or gradients for boosting).
    hess : per-row curvature; leaf value = sum(target)/sum(hess) over the
        leaf, which is the mean of `target` when hess is all ones.
    criterion : CRITERION_VARIANCE or CRITERION_GINI (target must be 0/1).
    max_depth : -1 for unlimited.
    max_features : number of candidate columns drawn fresh at every split.

    Returns (feature, threshold, left, right, value) arrays; feature == -1
    marks a leaf. Ties are broken toward the lowest column index, then the
    lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    hess = np.asarray(hess, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    p = X.shape[1]
    rng = SplitMix64(seed)
    if max_depth < 0:
        max_depth = 1 << 30

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(_NO_FEATURE)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    stack = [(rows, 0, new_node())]
    while stack:
        idx, depth, nid = stack.pop()
        t = target[idx]
        m = idx.shape[0]
        sum_t = float(np.cumsum(t)[-1])
        sum_h = float(np.cumsum(hess[idx])[-1])
        value[nid] = sum_t / sum_h if sum_h > 0.0 else 0.0

        if depth >= max_depth or m < 2 * min_samples_leaf or t.min() == t.max():
            continue

        if max_features < p:
            cand = rng.sample_sorted(p, max_features)
        else:
            cand = range(p)

        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for f in cand:
            v = X[idx, f]
            order = np.argsort(v, kind="stable")
            vs = v[order]
            if vs[0] == vs[m - 1]:
                continue
            cum = np.cumsum(t[order])
            tot = cum[-1]
            ncl = np.arange(1, m, dtype=np.float64)
            ncr = m - ncl
            valid = (vs[:-1] < vs[1:]) & (ncl >= min_samples_leaf) & (ncr >= min_samples_leaf)
            if not valid.any():
                continue
            ls = cum[:-1]
            if criterion == CRITERION_VARIANCE:
                score = ls * ls / ncl + (tot - ls) * (tot - ls) / ncr
            else:
                neg_l = ncl - ls
                pos_r = tot - ls
                neg_r = ncr - pos_r
                score = (ls * ls + neg_l * neg_l) / ncl + (pos_r * pos_r + neg_r * neg_r) / ncr
            score = np.where(valid, score, -np.inf)
            i = int(np.argmax(score))
            if score[i] > best_score:
                best_score = float(score[i])
                best_f = f
                thr = (vs[i] + vs[i + 1]) / 2.0
                if thr == vs[i + 1]:
                    thr = vs[i]
                best_thr = float(thr)

        if best_f < 0:
            continue

        mask = X[idx, best_f] <= best_thr
        lid = new_node()
        rid = new_node()
        feature[nid] = best_f
        threshold[nid] = best_thr
        left[nid] = lid
        right[nid] = rid
        stack.append((idx[~mask], depth + 1, rid))
        stack.append((idx[mask], depth + 1, lid))

    return (np.asarray(feature, dtype=np.int32),
            np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.int32),
            np.asarray(right, dtype=np.int32),
            np.asarray(value, dtype=np.float64))


def predict_tree(feature, threshold, left, right, value, X):
    """Route every row of X to its leaf and return the leaf values."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        nid = 0
        while feature[nid] >= 0:
            if X[i, feature[nid]] <= threshold[nid]:
                nid = left[nid]
            else:
                nid = right[nid]
        out[i] = value[nid]
    return out


def enet_cd(X, Xw, col_sq, r, b, l1, l2, max_iter, tol):
    """Cyclic coordinate descent for the (weighted) elastic net.

    Solves min_b (1/2n) sum_i w_i (z_i - Xb)_i^2 + l1*|b|_1 + (l2/2)*|b|_2^2
    on pre-centered data. `Xw` is X * w / n column-wise, `col_sq` is
    (1/n) sum_i w_i X_ij^2, and `r` holds the current residual z - Xb; `r`
    and `b` are updated in place (warm starts). Returns the number of sweeps
    used, or -(sweeps) if the coefficient-change tolerance was not met.
    """
    p = b.shape[0]
    for it in range(1, max_iter + 1):
        delta_max = 0.0
        for j in range(p):
            cj = col_sq[j]
            if cj <= 0.0:
                continue
            rho = float(np.dot(Xw[:, j], r)) + cj * b[j]
            if rho > l1:
                bn = (rho - l1) / (cj + l2)
            elif rho < -l1:
                bn = (rho + l1) / (cj + l2)
            else:
                bn = 0.0
            d = bn - b[j]
            if d != 0.0:
                r -= d * X[:, j]
                b[j] = bn
                if abs(d) > delta_max:
                    delta_max = abs(d)
        if delta_max <= tol:
            return it
    return -max_iter
