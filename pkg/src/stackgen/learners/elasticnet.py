"""Elastic-net family: coordinate-descent regularization paths, penalty
selection by cross-validation (CV MSE / CV deviance) or by AIC/BIC.

Objective (gaussian): (1/2n)||y - b0 - Xb||^2 + lam*(a*|b|_1 + (1-a)/2*|b|_2^2)
with a = l1_ratio. The logistic variant replaces the quadratic term with the
binomial negative log-likelihood /n, solved by IRLS with the same inner
coordinate descent. The grid runs log-spaced from lam_max (smallest penalty
with all slopes zero) down to eps*lam_max.
"""

from __future__ import annotations

import warnings

import numpy as np

from .. import _kernels as kernels
from ..data import assign_folds
from ..errors import ConvergenceWarning, SpecError
from .linear import sigmoid

_RIDGE_ALPHA_FLOOR = 1e-3  # lam_max is undefined at l1_ratio=0; standard floor


class EnetModel:
    """Fitted elastic-net (or lasso-IC) model on the training feature scale."""

    kind = "enet"

    def __init__(self, coef, intercept, link, lambda_, l1_ratio, extra=None):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.link = link
        self.lambda_ = float(lambda_)
        self.l1_ratio = float(l1_ratio)
        self.extra = extra or {}

    def predict(self, X):
        z = self.intercept + X @ self.coef
        return sigmoid(z) if self.link == "logistic" else z

    def to_dict(self):
        return {"kind": self.kind, "coef": self.coef, "intercept": self.intercept,
                "link": self.link, "lambda": self.lambda_,
                "l1_ratio": self.l1_ratio, "extra": self.extra}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["coef"]), d["intercept"], d["link"], d["lambda"],
                   d["l1_ratio"], dict(d.get("extra") or {}))


def lambda_grid(X, y, l1_ratio, n_alphas=100, eps=1e-3, task="regress"):
    """Log-spaced penalty grid from lam_max down to eps*lam_max (descending)."""
    n = X.shape[0]
    if task == "classify":
        pbar = float(np.mean(y))
        resid = y - pbar
    else:
        resid = y - float(np.mean(y))
    Xc = X - X.mean(axis=0)
    lam_max = float(np.max(np.abs(Xc.T @ resid))) / (n * max(l1_ratio, _RIDGE_ALPHA_FLOOR))
    if lam_max <= 0.0:
        lam_max = 1.0
    if n_alphas == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * eps, n_alphas)


def _truncate_rounding_dust(b):
    """Zero coefficients that only differ from zero by summation rounding
    (different dot-product orders can leave ~1e-16 slopes at lam_max, which
    would corrupt the degrees-of-freedom count)."""
    scale = float(np.abs(b).max())
    if scale > 0.0:
        b[np.abs(b) < 1e-13 * max(1.0, scale)] = 0.0


def gaussian_path(X, y, lambdas, l1_ratio, max_iter=1000, tol=1e-4,
                  fit_intercept=True):
    """Coordinate-descent solutions along a descending penalty grid.

    Returns (coefs [L, p], intercepts [L]). Warm-starts each penalty from the
    previous solution.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if fit_intercept:
        xm = X.mean(axis=0)
        ym = float(y.mean())
    else:
        xm = np.zeros(p)
        ym = 0.0
    Xc = np.asfortranarray(X - xm)
    yc = y - ym
    col_sq = np.ascontiguousarray((Xc ** 2).mean(axis=0))
    Xw = np.asfortranarray(Xc / n)

    b = np.zeros(p)
    r = yc.copy()
    coefs = np.empty((len(lambdas), p))
    intercepts = np.empty(len(lambdas))
    hit_cap = False
    for li, lam in enumerate(lambdas):
        it = kernels.enet_cd(Xc, Xw, col_sq, r, b,
                             lam * l1_ratio, lam * (1.0 - l1_ratio),
                             max_iter, tol)
        hit_cap = hit_cap or it < 0
        _truncate_rounding_dust(b)
        coefs[li] = b
        intercepts[li] = ym - float(xm @ b)
    if hit_cap:
        warnings.warn("coordinate descent hit max_iter on at least one "
                      "penalty; returning best iterates", ConvergenceWarning)
    return coefs, intercepts


def logistic_path(X, y, lambdas, l1_ratio, max_iter=1000, tol=1e-4,
                  outer_iter=50, fit_intercept=True):
    """Penalized logistic path: IRLS outer loop, coordinate-descent inner."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    pbar = float(np.clip(np.mean(y), 1e-10, 1 - 1e-10))

    b = np.zeros(p)
    b0 = float(np.log(pbar / (1.0 - pbar))) if fit_intercept else 0.0
    coefs = np.empty((len(lambdas), p))
    intercepts = np.empty(len(lambdas))
    for li, lam in enumerate(lambdas):
        l1 = lam * l1_ratio
        l2 = lam * (1.0 - l1_ratio)
        dev = np.inf
        for _ in range(outer_iter):
            eta = b0 + X @ b
            pr = np.clip(sigmoid(eta), 1e-5, 1.0 - 1e-5)
            w = pr * (1.0 - pr)
            z = eta + (y - pr) / w
            if fit_intercept:
                sw = float(w.sum())
                xm = (w @ X) / sw
                zm = float(w @ z) / sw
            else:
                xm = np.zeros(p)
                zm = 0.0
            Xc = X - xm
            zc = z - zm
            col_sq = np.ascontiguousarray((w @ (Xc ** 2)) / n)
            Xw = np.asfortranarray(Xc * w[:, None] / n)
            XcF = np.asfortranarray(Xc)
            r = zc - Xc @ b
            kernels.enet_cd(XcF, Xw, col_sq, r, b, l1, l2, max_iter, tol)
            b0 = (zm - float(xm @ b)) if fit_intercept else 0.0
            dev_new = binomial_deviance(y, sigmoid(b0 + X @ b))
            if abs(dev - dev_new) <= 1e-8 * max(1.0, abs(dev_new)):
                dev = dev_new
                break
            dev = dev_new
        _truncate_rounding_dust(b)
        coefs[li] = b
        intercepts[li] = b0
    return coefs, intercepts


def binomial_deviance(y, p):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-2.0 * np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def fit_elastic_net_cv(X, y, l1_ratio, n_alphas=100, eps=1e-3, bfolds=5,
                       seed=0, task="regress", alphas=None, max_iter=1000,
                       tol=1e-4, fit_intercept=True) -> EnetModel:
    """Select the penalty by bfolds-fold CV (MSE for regression, deviance for
    classification), then refit on all rows at the chosen penalty."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if bfolds < 2:
        raise SpecError(f"cross-validation needs at least 2 folds, got {bfolds}")
    link = "logistic" if task == "classify" else "identity"

    if task == "regress" and float(np.var(y)) == 0.0:
        warnings.warn("outcome has zero variance; fitting intercept-only model")
        return EnetModel(np.zeros(X.shape[1]), float(y.mean()), link,
                         0.0, l1_ratio)

    if alphas is not None:
        lambdas = np.sort(np.asarray(alphas, dtype=np.float64))[::-1]
    else:
        lambdas = lambda_grid(X, y, l1_ratio, n_alphas, eps, task)

    path = logistic_path if task == "classify" else gaussian_path

    loss = np.zeros(len(lambdas))
    if len(lambdas) > 1:
        folds = assign_folds(n, bfolds, seed)
        for k in range(1, bfolds + 1):
            val = folds.fold == k
            coefs, icpts = path(X[~val], y[~val], lambdas, l1_ratio,
                                max_iter=max_iter, tol=tol,
                                fit_intercept=fit_intercept)
            pred = icpts[None, :] + X[val] @ coefs.T
            if task == "classify":
                for li in range(len(lambdas)):
                    loss[li] += binomial_deviance(y[val], sigmoid(pred[:, li]))
            else:
                loss += ((y[val, None] - pred) ** 2).sum(axis=0)
        best = int(np.argmin(loss / n))
    else:
        best = 0

    coefs, icpts = path(X, y, lambdas, l1_ratio, max_iter=max_iter, tol=tol,
                        fit_intercept=fit_intercept)
    return EnetModel(coefs[best], icpts[best], link, lambdas[best], l1_ratio,
                     extra={"cv_loss": (loss / n).tolist(),
                            "grid": lambdas.tolist()})


def fit_lasso_ic(X, y, criterion="aic", n_alphas=100, eps=1e-3,
                 max_iter=1000, tol=1e-4) -> EnetModel:
    """Lasso with the penalty chosen by an information criterion.

    criterion(lam) = n*ln(RSS(lam)/n) + penalty*df(lam), df = nonzero slopes,
    penalty 2 for AIC and ln(n) for BIC. Regression only.
    """
    if criterion not in ("aic", "bic"):
        raise SpecError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if float(np.var(y)) == 0.0:
        warnings.warn("outcome has zero variance; fitting intercept-only model")
        return EnetModel(np.zeros(X.shape[1]), float(y.mean()), "identity", 0.0, 1.0)
    lambdas = lambda_grid(X, y, 1.0, n_alphas, eps, "regress")
    coefs, icpts = gaussian_path(X, y, lambdas, 1.0, max_iter=max_iter, tol=tol)
    pen = 2.0 if criterion == "aic" else float(np.log(n))
    scores = np.empty(len(lambdas))
    for li in range(len(lambdas)):
        resid = y - icpts[li] - X @ coefs[li]
        rss = float(resid @ resid)
        df = int(np.count_nonzero(coefs[li]))
        scores[li] = n * np.log(max(rss, 1e-300) / n) + pen * df
    best = int(np.argmin(scores))
    return EnetModel(coefs[best], icpts[best], "identity", lambdas[best], 1.0,
                     extra={"criterion": criterion, "ic_path": scores.tolist()})
