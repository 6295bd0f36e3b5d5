"""Final-learner solvers that combine the cross-fitted prediction matrix.

The default estimator (nnls1) minimizes the squared error over the
probability simplex (weights nonnegative, summing to one) and is solved
exactly by active-set iteration. Relatives: nnls0 (nonnegative only, by
Lawson-Hanson), ls1 (sum-to-one only, closed form), singlebest
(winner-takes-all), plain ols, and ridge with a CV-chosen penalty.

For classification, nnls1/nnls0/ls1/singlebest/ols regress the 0/1 outcome
on the cross-fitted probabilities with squared loss; ridge switches to a
penalized logistic model.
"""

from __future__ import annotations

import numpy as np

from ._rng import derive_seed
from .data import assign_folds
from .errors import SpecError
from .learners.linear import sigmoid

FINAL_ESTIMATORS = ("nnls1", "nnls0", "singlebest", "ls1", "ols", "ridge",
                    "voting")

_TOL_OBJ = 1e-10


class FinalFit:
    """Weights/coefficients of the fitted final learner."""

    def __init__(self, weights, intercept, estimator, objective, link="identity"):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.intercept = float(intercept)
        self.estimator = estimator
        self.objective = float(objective)
        self.link = link

    def combine(self, base_predictions):
        """Stacked prediction from an (n, J) matrix of base predictions."""
        z = self.intercept + base_predictions @ self.weights
        return sigmoid(z) if self.link == "logistic" else z

    def to_dict(self):
        return {"weights": self.weights, "intercept": self.intercept,
                "estimator": self.estimator, "objective": self.objective,
                "link": self.link}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"]), d["intercept"], d["estimator"],
                   d["objective"], d["link"])


def _as_zy(Z, y):
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise SpecError("prediction matrix and outcome shapes do not match")
    return Z, y


def _sse(Z, y, w, intercept=0.0):
    r = y - intercept - Z @ w
    return float(r @ r)


def _merge_duplicate_columns(Z, w):
    """Redistribute weight mass uniformly over bitwise-identical columns."""
    J = Z.shape[1]
    groups: dict[bytes, list[int]] = {}
    for j in range(J):
        groups.setdefault(Z[:, j].tobytes(), []).append(j)
    out = w.copy()
    for cols in groups.values():
        if len(cols) > 1:
            share = out[cols].sum() / len(cols)
            out[cols] = share
    return out


def _solve_face(G, b):
    """Solve the equality-constrained normal equations on a face:
    minimize ||y - Z_S u||^2 subject to sum(u) = 1."""
    k = G.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * G
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[:k] = b
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        kkt[:k, :k] += 1e-10 * np.eye(k)
        sol = np.linalg.solve(kkt, rhs)
    return sol[:k]


def solve_nnls1(Z, y) -> FinalFit:
    """Exact least squares over the probability simplex (active-set).

    Starts at the best vertex and alternates two moves: solve the
    equality-constrained problem on the current support (dropping blocking
    coordinates along the way), then add the vertex whose directional
    derivative from the current point is most negative. Stops when every
    directional derivative toward a vertex is >= -1e-9 or the objective
    stops decreasing.
    """
    Z, y = _as_zy(Z, y)
    n, J = Z.shape
    if J == 1:
        w = np.ones(1)
        return FinalFit(w, 0.0, "nnls1", _sse(Z, y, w))

    G = Z.T @ Z
    Zty = Z.T @ y
    col_sse = np.array([_sse(Z, y, _unit(J, j)) for j in range(J)])
    w = _unit(J, int(np.argmin(col_sse)))
    support = w > 0
    prev_obj = np.inf

    for _ in range(10 * J * J):
        # optimize over the current face, dropping blocking coordinates
        for _ in range(J + 1):
            idx = np.flatnonzero(support)
            u = _solve_face(G[np.ix_(idx, idx)], 2.0 * Zty[idx])
            if np.min(u) >= -1e-12:
                w = np.zeros(J)
                w[idx] = np.maximum(u, 0.0)
                w /= w.sum()
                support = w > 0
                break
            # step from w toward u until the first coordinate hits zero
            ws = w[idx]
            du = u - ws
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(u < 0.0, ws / -du, np.inf)
            j_block = int(np.argmin(steps))
            ws = ws + float(steps[j_block]) * du
            ws[j_block] = 0.0
            ws = np.maximum(ws, 0.0)
            ws /= ws.sum()
            w = np.zeros(J)
            w[idx] = ws
            support = w > 0

        # simplex optimality: derivative from w toward vertex e_j is g_j - g.w
        g = 2.0 * (G @ w - Zty)
        viol = g - float(g @ w)
        j_add = int(np.argmin(viol))
        obj = _sse(Z, y, w)
        no_progress = prev_obj - obj < _TOL_OBJ
        prev_obj = obj
        if viol[j_add] >= -1e-9 or support[j_add] or no_progress:
            break
        support[j_add] = True

    w = _merge_duplicate_columns(Z, w)
    return FinalFit(w, 0.0, "nnls1", _sse(Z, y, w))


def _unit(J, j):
    e = np.zeros(J)
    e[j] = 1.0
    return e


def solve_nnls0(Z, y) -> FinalFit:
    """Nonnegative least squares (Lawson-Hanson active set)."""
    Z, y = _as_zy(Z, y)
    n, J = Z.shape
    w = np.zeros(J)
    passive = np.zeros(J, dtype=bool)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(Z.T @ y))))
    for _ in range(30 * max(J, 1)):
        grad = Z.T @ (y - Z @ w)
        candidates = ~passive & (grad > tol)
        if not candidates.any():
            break
        j = int(np.argmax(np.where(candidates, grad, -np.inf)))
        passive[j] = True
        for _ in range(J + 1):
            idx = np.flatnonzero(passive)
            sub, *_ = np.linalg.lstsq(Z[:, idx], y, rcond=None)
            if np.min(sub) > 0.0:
                w = np.zeros(J)
                w[idx] = sub
                break
            # move toward the subproblem solution until a coordinate hits 0
            ws = w[idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(sub <= 0.0, ws / (ws - sub), np.inf)
            t = float(np.min(steps))
            w = np.zeros(J)
            w[idx] = np.maximum(ws + t * (sub - ws), 0.0)
            w[idx[steps <= t]] = 0.0
            passive = w > 0.0
            if not passive.any():
                break
        if not passive.any():
            break
    w = _merge_duplicate_columns(Z, w)
    return FinalFit(w, 0.0, "nnls0", _sse(Z, y, w))


def solve_ls1(Z, y) -> FinalFit:
    """Least squares with only the sum-to-one constraint (closed form)."""
    Z, y = _as_zy(Z, y)
    w = _solve_face(Z.T @ Z, 2.0 * (Z.T @ y))
    w = _merge_duplicate_columns(Z, w)
    return FinalFit(w, 0.0, "ls1", _sse(Z, y, w))


def solve_singlebest(Z, y, task="regress") -> FinalFit:
    """Weight 1 on the learner with minimal squared loss (Brier score on
    probabilities for classification); ties go to the lowest index."""
    Z, y = _as_zy(Z, y)
    J = Z.shape[1]
    sse = np.array([_sse(Z, y, _unit(J, j)) for j in range(J)])
    jbest = int(np.argmin(sse))
    return FinalFit(_unit(J, jbest), 0.0, "singlebest", float(sse[jbest]))


def solve_ols_final(Z, y) -> FinalFit:
    """Unconstrained least squares with an intercept."""
    Z, y = _as_zy(Z, y)
    A = np.hstack([np.ones((Z.shape[0], 1)), Z])
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return FinalFit(beta[1:], beta[0], "ols", _sse(Z, y, beta[1:], beta[0]))


def _ridge_solve(Z, y, lam):
    # (1/2n)||y - b0 - Zw||^2 + (lam/2)||w||^2 on centered data
    n = Z.shape[0]
    zm = Z.mean(axis=0)
    ym = float(y.mean())
    Zc = Z - zm
    w = np.linalg.solve(Zc.T @ Zc / n + lam * np.eye(Z.shape[1]), Zc.T @ (y - ym) / n)
    return w, ym - float(zm @ w)


def _ridge_logistic(Z, y, lam, max_iter=100):
    # penalized logistic with unpenalized intercept, Newton iterations
    n, J = Z.shape
    A = np.hstack([np.ones((n, 1)), Z])
    beta = np.zeros(J + 1)
    pen = np.full(J + 1, lam * n)
    pen[0] = 0.0
    for _ in range(max_iter):
        p = sigmoid(A @ beta)
        g = A.T @ (y - p) - pen * beta
        if np.max(np.abs(g)) < 1e-8 * n:
            break
        wdiag = np.clip(p * (1.0 - p), 1e-10, None)
        H = A.T @ (A * wdiag[:, None]) + np.diag(pen)
        beta = beta + np.linalg.solve(H, g)
    return beta[1:], float(beta[0])


def solve_ridge_final(Z, y, bfolds=5, seed=0, task="regress") -> FinalFit:
    """L2-penalized final learner (logistic for classification); the penalty
    is chosen by bfolds-fold CV over a log grid 1e-4..1e4 (9 points)."""
    Z, y = _as_zy(Z, y)
    n = Z.shape[0]
    grid = np.logspace(-4, 4, 9)
    folds = assign_folds(n, bfolds, derive_seed(seed, 71))
    loss = np.zeros(grid.size)
    for k in range(1, bfolds + 1):
        val = folds.fold == k
        for gi, lam in enumerate(grid):
            if task == "classify":
                w, b0 = _ridge_logistic(Z[~val], y[~val], lam)
                p = np.clip(sigmoid(b0 + Z[val] @ w), 1e-12, 1 - 1e-12)
                loss[gi] += float(-2.0 * np.sum(y[val] * np.log(p)
                                                + (1 - y[val]) * np.log(1 - p)))
            else:
                w, b0 = _ridge_solve(Z[~val], y[~val], lam)
                r = y[val] - b0 - Z[val] @ w
                loss[gi] += float(r @ r)
    lam = float(grid[int(np.argmin(loss))])
    if task == "classify":
        w, b0 = _ridge_logistic(Z, y, lam)
        p = sigmoid(b0 + Z @ w)
        obj = float(np.sum((y - p) ** 2))
        return FinalFit(w, b0, "ridge", obj, link="logistic")
    w, b0 = _ridge_solve(Z, y, lam)
    return FinalFit(w, b0, "ridge", _sse(Z, y, w, b0))


def solve_final(estimator, Z, y, task="regress", bfolds=5, seed=0) -> FinalFit:
    """Dispatch by final-estimator name."""
    if estimator == "nnls1":
        return solve_nnls1(Z, y)
    if estimator == "nnls0":
        return solve_nnls0(Z, y)
    if estimator == "ls1":
        return solve_ls1(Z, y)
    if estimator == "singlebest":
        return solve_singlebest(Z, y, task)
    if estimator == "ols":
        return solve_ols_final(Z, y)
    if estimator == "ridge":
        return solve_ridge_final(Z, y, bfolds=bfolds, seed=seed, task=task)
    raise SpecError(f"unknown final estimator {estimator!r}")
