"""Linear regression and logistic regression, plus the score calibration
used to turn SVM decision values into probabilities."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConvergenceWarning


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LinearModel:
    """Coefficients + intercept with an identity or logistic link."""

    kind = "linear"

    def __init__(self, coef, intercept, link="identity", extra=None):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.link = link
        self.extra = extra or {}

    def decision(self, X):
        return self.intercept + X @ self.coef

    def predict(self, X):
        z = self.decision(X)
        return sigmoid(z) if self.link == "logistic" else z

    def to_dict(self):
        return {"kind": self.kind, "coef": self.coef, "intercept": self.intercept,
                "link": self.link, "extra": self.extra}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["coef"]), d["intercept"], d["link"],
                   dict(d.get("extra") or {}))


def fit_ols(X, y, fit_intercept=True) -> LinearModel:
    """Least squares with an intercept (minimum-norm solution if singular)."""
    if not fit_intercept:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        return LinearModel(beta, 0.0, "identity")
    n = X.shape[0]
    A = np.hstack([np.ones((n, 1)), X])
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel(beta[1:], beta[0], "identity")


def _log_likelihood(y_frac, p):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(np.sum(y_frac * np.log(p) + (1.0 - y_frac) * np.log(1.0 - p)))


def fit_logit(X, y, max_iter=100, tol=1e-4) -> LinearModel:
    """Unpenalized logistic regression by Newton-Raphson with step halving.

    `y` may contain fractional targets (used by the Platt calibration).
    Stops when the max absolute mean-gradient falls below `tol` or the
    log-likelihood plateaus; warns and returns the best iterate if max_iter
    is exhausted first (e.g. separable data).
    """
    n = X.shape[0]
    A = np.hstack([np.ones((n, 1)), X])
    beta = np.zeros(A.shape[1])
    best_beta = beta.copy()
    ll = best_ll = _log_likelihood(y, sigmoid(A @ beta))
    converged = False
    for _ in range(max_iter):
        p = sigmoid(A @ beta)
        g = A.T @ (y - p)
        if np.max(np.abs(g)) / n <= tol:
            converged = True
            break
        w = np.clip(p * (1.0 - p), 1e-10, None)
        H = A.T @ (A * w[:, None])
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(H, g, rcond=None)
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            ll_new = _log_likelihood(y, sigmoid(A @ cand))
            if ll_new >= ll:
                break
            scale *= 0.5
        beta = beta + scale * step
        ll_prev, ll = ll, _log_likelihood(y, sigmoid(A @ beta))
        if ll > best_ll:
            best_ll = ll
            best_beta = beta.copy()
        if abs(ll - ll_prev) <= 1e-10 * max(1.0, abs(ll)):
            converged = True
            break
    if not converged:
        warnings.warn("logistic regression did not converge within "
                      f"{max_iter} iterations; returning best iterate",
                      ConvergenceWarning)
        beta = best_beta
    return LinearModel(beta[1:], beta[0], "logistic")


def platt_calibration(scores, y) -> tuple[float, float]:
    """Fit p(y=1 | s) = sigmoid(a*s + b) on training decision scores.

    Uses the smoothed targets (n+ + 1)/(n+ + 2) and 1/(n- + 2), which keep
    the likelihood bounded on perfectly separated scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_pos = float(np.sum(y == 1.0))
    n_neg = float(np.sum(y == 0.0))
    t = np.where(y == 1.0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    model = fit_logit(scores[:, None], t, max_iter=200, tol=1e-8)
    return float(model.coef[0]), float(model.intercept)
