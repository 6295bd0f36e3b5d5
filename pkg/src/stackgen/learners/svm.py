"""Linear support vector machines: hinge-loss classification (SVC) and
epsilon-insensitive regression (SVR).

Primal objective: (1/2)||beta||^2 + C * sum_i loss_i, where beta includes an
augmented (penalized) bias coordinate. Both problems are solved in the dual
by deterministic cyclic coordinate descent, which needs no randomness and
converges to the stated tolerance. SVC decision scores are mapped to
probabilities by a logistic calibration fit on the training scores, because
the stacking layer consumes probabilities.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConvergenceWarning, SpecError
from .linear import platt_calibration, sigmoid


class SVMModel:
    kind = "svm"

    def __init__(self, w, mode, platt=None):
        self.w = np.asarray(w, dtype=np.float64)  # last entry is the bias
        self.mode = mode  # "svc" | "svr"
        self.platt = platt  # (a, b) for svc

    def decision(self, X):
        return X @ self.w[:-1] + self.w[-1]

    def predict(self, X):
        score = self.decision(X)
        if self.mode == "svr":
            return score
        a, b = self.platt
        return sigmoid(a * score + b)

    def to_dict(self):
        return {"kind": self.kind, "w": self.w, "mode": self.mode,
                "platt": list(self.platt) if self.platt else None}

    @classmethod
    def from_dict(cls, d):
        platt = tuple(d["platt"]) if d.get("platt") else None
        return cls(np.asarray(d["w"]), d["mode"], platt)


def _check_params(C, epsilon):
    if C <= 0:
        raise SpecError(f"C must be positive, got {C}")
    if epsilon < 0:
        raise SpecError(f"epsilon must be nonnegative, got {epsilon}")


def fit_linear_svm(X, y, C=1.0, epsilon=0.1, mode="svc", tol=1e-4,
                   max_iter=1000, seed=0) -> SVMModel:
    """Fit by cyclic dual coordinate descent (deterministic; seed unused)."""
    _check_params(C, epsilon)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    Xa = np.hstack([X, np.ones((n, 1))])
    qii = (Xa ** 2).sum(axis=1)

    if mode == "svc":
        ypm = np.where(y == 1.0, 1.0, -1.0)
        alpha = np.zeros(n)
        w = np.zeros(Xa.shape[1])
        converged = False
        for _ in range(max_iter):
            max_pg = 0.0
            for i in range(n):
                g = ypm[i] * float(Xa[i] @ w) - 1.0
                if alpha[i] == 0.0:
                    pg = min(g, 0.0)
                elif alpha[i] == C:
                    pg = max(g, 0.0)
                else:
                    pg = g
                if abs(pg) > max_pg:
                    max_pg = abs(pg)
                if pg != 0.0:
                    a_new = min(max(alpha[i] - g / qii[i], 0.0), C)
                    if a_new != alpha[i]:
                        w += (a_new - alpha[i]) * ypm[i] * Xa[i]
                        alpha[i] = a_new
            if max_pg < tol:
                converged = True
                break
        if not converged:
            warnings.warn(f"linear SVC did not converge in {max_iter} sweeps",
                          ConvergenceWarning)
        scores = Xa @ w
        return SVMModel(w, "svc", platt_calibration(scores, y))

    # epsilon-insensitive SVR; beta_i in [-C, C]
    beta = np.zeros(n)
    w = np.zeros(Xa.shape[1])
    converged = False
    for _ in range(max_iter):
        max_d = 0.0
        for i in range(n):
            g = float(Xa[i] @ w) - y[i]
            u = beta[i] - g / qii[i]
            shrink = epsilon / qii[i]
            if u > shrink:
                b_new = u - shrink
            elif u < -shrink:
                b_new = u + shrink
            else:
                b_new = 0.0
            b_new = min(max(b_new, -C), C)
            d = b_new - beta[i]
            if d != 0.0:
                w += d * Xa[i]
                beta[i] = b_new
                if abs(d) > max_d:
                    max_d = abs(d)
        if max_d < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"linear SVR did not converge in {max_iter} sweeps",
                      ConvergenceWarning)
    return SVMModel(w, "svr")
