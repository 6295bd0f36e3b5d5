"""Fully connected feed-forward network trained with Adam.

Regression uses an identity output and half mean-squared error; binary
classification uses a sigmoid output with cross-entropy. Mini-batches of
min(200, n); per-layer scaled-uniform (fan-in/fan-out) weight init, all
randomness from a seeded PCG64 generator so the same seed reproduces the
same fitted weights bit for bit. early_stopping holds out a validation
fraction and keeps the best-scoring weights.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConvergenceWarning, SpecError
from .linear import sigmoid

_ACTIVATIONS = ("relu", "tanh", "logistic")


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return sigmoid(z)


def _act_grad(a, kind):
    # written in terms of the activation output a
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - a * a
    return a * (1.0 - a)


class MLPModel:
    kind = "mlp"

    def __init__(self, weights, biases, activation, link):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.activation = activation
        self.link = link

    def decision(self, X):
        a = np.asarray(X, dtype=np.float64)
        last = len(self.weights) - 1
        for li, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if li == last else _act(z, self.activation)
        return a[:, 0]

    def predict(self, X):
        z = self.decision(X)
        return sigmoid(z) if self.link == "logistic" else z

    def to_dict(self):
        return {"kind": self.kind, "activation": self.activation,
                "link": self.link, "weights": self.weights,
                "biases": self.biases}

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["biases"], d["activation"], d["link"])


def loss_and_gradient(weights, biases, activation, link, X, y):
    """Batch loss and parameter gradients (used by training and the
    finite-difference gradient tests).

    Loss: 0.5*mean((f-y)^2) for identity link; mean cross-entropy for
    logistic. Both give output delta (f - y)/batch.
    """
    n = X.shape[0]
    acts = [np.asarray(X, dtype=np.float64)]
    last = len(weights) - 1
    for li, (W, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ W + b
        acts.append(z if li == last else _act(z, activation))
    out = acts[-1][:, 0]
    y = np.asarray(y, dtype=np.float64)
    if link == "logistic":
        p = sigmoid(out)
        pc = np.clip(p, 1e-12, 1.0 - 1e-12)
        loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
        delta = ((p - y) / n)[:, None]
    else:
        loss = float(0.5 * np.mean((out - y) ** 2))
        delta = ((out - y) / n)[:, None]

    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for li in range(last, -1, -1):
        grads_w[li] = acts[li].T @ delta
        grads_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ weights[li].T) * _act_grad(acts[li], activation)
    return loss, grads_w, grads_b


def fit_mlp(X, y, task="regress", hidden_layer_sizes=(100,), activation="relu",
            learning_rate_init=1e-3, batch_size=None, max_iter=200, tol=1e-4,
            early_stopping=False, validation_fraction=0.1,
            n_iter_no_change=10, seed=0) -> MLPModel:
    if not hidden_layer_sizes:
        raise SpecError("hidden_layer_sizes must name at least one layer")
    if any(int(h) < 1 for h in hidden_layer_sizes):
        raise SpecError("hidden layer sizes must be positive")
    if activation not in _ACTIVATIONS:
        raise SpecError(f"activation must be one of {_ACTIVATIONS}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    link = "logistic" if task == "classify" else "identity"
    rng = np.random.Generator(np.random.PCG64(seed))

    sizes = [p] + [int(h) for h in hidden_layer_sizes] + [1]
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))

    if early_stopping:
        n_val = max(1, int(round(validation_fraction * n)))
        if n_val >= n:
            raise SpecError("validation_fraction leaves no training rows")
        perm = rng.permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        train_idx = np.arange(n)
        val_idx = None

    Xt, yt = X[train_idx], y[train_idx]
    nt = Xt.shape[0]
    bs = min(200, nt) if batch_size is None else min(int(batch_size), nt)

    ms = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
    vs = [np.zeros_like(m) for m in ms]
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    t_step = 0

    best_score = np.inf
    best_params = None
    stall = 0
    converged = False
    for _ in range(max_iter):
        order = rng.permutation(nt)
        for start in range(0, nt, bs):
            batch = order[start:start + bs]
            _, gw, gb = loss_and_gradient(weights, biases, activation, link,
                                          Xt[batch], yt[batch])
            t_step += 1
            corr1 = 1.0 - beta1 ** t_step
            corr2 = 1.0 - beta2 ** t_step
            params = weights + biases
            grads = gw + gb
            for pi, (prm, g) in enumerate(zip(params, grads)):
                ms[pi] = beta1 * ms[pi] + (1.0 - beta1) * g
                vs[pi] = beta2 * vs[pi] + (1.0 - beta2) * g * g
                prm -= learning_rate_init * (ms[pi] / corr1) / (
                    np.sqrt(vs[pi] / corr2) + eps_adam)

        if early_stopping:
            score, _, _ = loss_and_gradient(weights, biases, activation, link,
                                            X[val_idx], y[val_idx])
        else:
            score, _, _ = loss_and_gradient(weights, biases, activation, link,
                                            Xt, yt)
        if score < best_score - tol:
            stall = 0
        else:
            stall += 1
        if score < best_score:
            best_score = score
            if early_stopping:
                best_params = ([w.copy() for w in weights],
                               [b.copy() for b in biases])
        if stall >= n_iter_no_change:
            converged = True
            break

    if not converged:
        warnings.warn(f"MLP training hit max_iter={max_iter} before the loss "
                      "plateaued", ConvergenceWarning)
    if early_stopping and best_params is not None:
        weights, biases = best_params
    return MLPModel(weights, biases, activation, link)
