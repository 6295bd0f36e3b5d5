"""Base learners behind one fit/predict interface.

A LearnerSpec names the method, the task, the hyperparameter options, the
preprocessing pipeline, and an optional predictor subset. `fit` applies the
subset and pipeline, then dispatches to the method implementation; the
returned FittedLearner carries everything `predict` needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._rng import derive_seed
from ..data import CLASSIFY, REGRESS
from ..errors import DataError, SpecError
from ..pipeline import (FittedPipeline, PipelineSpec, fit_transform,
                        parse_pipeline, transform)
from .boosting import BoostModel, fit_gradient_boost
from .elasticnet import (EnetModel, fit_elastic_net_cv, fit_lasso_ic,
                         gaussian_path, lambda_grid, logistic_path)
from .linear import LinearModel, fit_logit, fit_ols, platt_calibration
from .mlp import MLPModel, fit_mlp, loss_and_gradient
from .svm import SVMModel, fit_linear_svm
from .trees import ForestModel, Tree, fit_random_forest

METHODS = ("ols", "logit", "lassocv", "ridgecv", "elasticcv", "lassoic",
           "rf", "gradboost", "linsvm", "svm", "nnet")

# the allowed (method, task) grid
_ALLOWED_TASKS = {
    "ols": (REGRESS,),
    "logit": (CLASSIFY,),
    "lassoic": (REGRESS,),
    "lassocv": (REGRESS, CLASSIFY),
    "ridgecv": (REGRESS, CLASSIFY),
    "elasticcv": (REGRESS, CLASSIFY),
    "svm": (REGRESS, CLASSIFY),
    "gradboost": (REGRESS, CLASSIFY),
    "rf": (REGRESS, CLASSIFY),
    "linsvm": (CLASSIFY,),
    "nnet": (REGRESS, CLASSIFY),
}

_REGULARIZED = ("lassocv", "ridgecv", "elasticcv", "lassoic")


# ---------------------------------------------------------------------------
# option parsing/validation

def _p_int(s):
    return int(s)


def _p_float(s):
    return float(s)


def _p_bool(s):
    if isinstance(s, bool):
        return s
    if str(s) in ("True", "true", "1"):
        return True
    if str(s) in ("False", "false", "0"):
        return False
    raise ValueError(f"expected True/False, got {s!r}")


def _p_optional_int(s):
    if s is None or str(s) == "None":
        return None
    return int(s)


def _p_optional_float_or_int(s):
    if s is None or str(s) == "None":
        return None
    return float(s) if "." in str(s) or "e" in str(s).lower() else int(s)


def _p_max_features(s):
    if s is None or str(s) == "None":
        return None
    if str(s) == "sqrt":
        return "sqrt"
    return _p_optional_float_or_int(s)


def _p_alphas(s):
    if s is None or str(s) == "None":
        return None
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(tok) for tok in str(s).split()]


def _p_layers(s):
    if isinstance(s, (list, tuple)):
        vals = [int(v) for v in s]
    else:
        vals = [int(tok) for tok in str(s).split()]
    if not vals:
        raise ValueError("hidden_layer_sizes must name at least one layer")
    return tuple(vals)


def _p_batch(s):
    if s is None or str(s) == "auto":
        return "auto"
    return int(s)


def _p_choice(*choices):
    def parse(s):
        if s not in choices:
            raise ValueError(f"expected one of {choices}, got {s!r}")
        return s
    return parse


_ENET_COMMON = {
    "alphas": (None, _p_alphas),
    "eps": (1e-3, _p_float),
    "n_alphas": (100, _p_int),
    "fit_intercept": (True, _p_bool),
    "max_iter": (1000, _p_int),
    "tol": (1e-4, _p_float),
    "cv": (5, _p_int),
}


def _option_table(method, task):
    if method == "ols":
        return {"fit_intercept": (True, _p_bool)}
    if method == "logit":
        return {"max_iter": (100, _p_int), "tol": (1e-4, _p_float)}
    if method in ("lassocv", "ridgecv", "elasticcv"):
        l1 = {"lassocv": 1.0, "ridgecv": 0.0, "elasticcv": 0.5}[method]
        return {"l1_ratio": (l1, _p_float), **_ENET_COMMON}
    if method == "lassoic":
        return {"criterion": ("aic", _p_choice("aic", "bic")),
                "eps": (1e-3, _p_float), "n_alphas": (100, _p_int),
                "max_iter": (1000, _p_int), "tol": (1e-4, _p_float)}
    if method == "rf":
        return {"n_estimators": (100, _p_int),
                "max_depth": (None, _p_optional_int),
                "min_samples_leaf": (1, _p_int),
                "max_features": (None if task == REGRESS else "sqrt",
                                 _p_max_features),
                "max_samples": (None, _p_optional_float_or_int),
                "bootstrap": (True, _p_bool)}
    if method == "gradboost":
        return {"learning_rate": (0.1, _p_float),
                "n_estimators": (100, _p_int),
                "max_depth": (3, _p_optional_int),
                "subsample": (1.0, _p_float),
                "min_samples_leaf": (1, _p_int)}
    if method == "svm":
        table = {"C": (1.0, _p_float), "tol": (1e-4, _p_float),
                 "max_iter": (1000, _p_int)}
        if task == REGRESS:
            table["epsilon"] = (0.1, _p_float)
        return table
    if method == "linsvm":
        return {"C": (1.0, _p_float), "tol": (1e-4, _p_float),
                "max_iter": (1000, _p_int)}
    if method == "nnet":
        return {"hidden_layer_sizes": ((100,), _p_layers),
                "activation": ("relu", _p_choice("relu", "tanh", "logistic")),
                "learning_rate_init": (1e-3, _p_float),
                "batch_size": ("auto", _p_batch),
                "max_iter": (200, _p_int),
                "tol": (1e-4, _p_float),
                "early_stopping": (False, _p_bool),
                "validation_fraction": (0.1, _p_float),
                "n_iter_no_change": (10, _p_int)}
    raise SpecError(f"unknown method {method!r}")


def check_method_task(method, task):
    if method not in _ALLOWED_TASKS:
        raise SpecError(f"unknown method {method!r}")
    if task not in _ALLOWED_TASKS[method]:
        raise SpecError(f"method {method!r} does not support type {task!r}")


def default_options(method, task) -> dict:
    """Default option values for a valid (method, task) pair."""
    check_method_task(method, task)
    return {k: v for k, (v, _) in _option_table(method, task).items()}


def _format_value(v):
    if v is None:
        return "None"
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        text = repr(v)
        if text.startswith("0.") and len(text) > 2:
            text = text[1:]
        elif text.startswith("-0."):
            text = "-" + text[2:]
        return text
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    if isinstance(v, list):
        return " ".join(_format_value(x) for x in v)
    return str(v)


def format_options(options) -> str:
    """Render options one per line in key(value) form."""
    return "\n".join(f"{k}({_format_value(v)})" for k, v in options.items())


@dataclass(frozen=True)
class LearnerSpec:
    """One base learner: method, task, options, pipeline, predictor subset."""

    method: str
    task: str = REGRESS
    options: dict = field(default_factory=dict)
    pipeline: PipelineSpec = field(default_factory=PipelineSpec)
    xvars: tuple | None = None

    def __post_init__(self):
        check_method_task(self.method, self.task)
        if isinstance(self.pipeline, str):
            object.__setattr__(self, "pipeline", parse_pipeline(self.pipeline))
        elif not isinstance(self.pipeline, PipelineSpec):
            object.__setattr__(self, "pipeline", PipelineSpec(tuple(self.pipeline)))
        table = _option_table(self.method, self.task)
        resolved = {}
        for key, raw in dict(self.options).items():
            if key not in table:
                raise SpecError(f"unknown option {key!r} for method "
                                f"{self.method!r} (type {self.task})")
            _, parser = table[key]
            try:
                resolved[key] = parser(raw) if isinstance(raw, str) else _coerce(parser, raw)
            except (ValueError, TypeError) as exc:
                raise SpecError(f"bad value for {key}: {exc}") from None
        object.__setattr__(self, "options", resolved)
        if self.xvars is not None:
            object.__setattr__(self, "xvars", tuple(self.xvars))

    def resolved_options(self) -> dict:
        out = default_options(self.method, self.task)
        out.update(self.options)
        return out

    def effective_pipeline(self) -> PipelineSpec:
        """The pipeline actually executed: regularized-regression methods get
        an implicit leading stdscaler unless nostdscaler is present."""
        if (self.method in _REGULARIZED
                and not self.pipeline.suppresses_default_scaler):
            return self.pipeline.with_prepended("stdscaler")
        return self.pipeline

    def to_dict(self):
        return {"method": self.method, "task": self.task,
                "options": {k: _jsonable(v) for k, v in self.options.items()},
                "pipeline": [list(s) for s in self.pipeline.steps],
                "xvars": list(self.xvars) if self.xvars is not None else None}

    @classmethod
    def from_dict(cls, d):
        pipe = PipelineSpec(tuple((n, dict(p)) for n, p in d["pipeline"]))
        opts = {k: (tuple(v) if isinstance(v, list) and k == "hidden_layer_sizes"
                    else v) for k, v in d["options"].items()}
        return cls(d["method"], d["task"], opts, pipe,
                   tuple(d["xvars"]) if d["xvars"] is not None else None)


def _coerce(parser, value):
    # values arriving from code (not strings) still go through the parser for
    # normalization, except where the parser is string-oriented
    try:
        return parser(value)
    except (ValueError, TypeError):
        raise


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


_MODEL_KINDS = {"linear": LinearModel, "enet": EnetModel, "forest": ForestModel,
                "boost": BoostModel, "svm": SVMModel, "mlp": MLPModel}


@dataclass
class FittedLearner:
    """A fitted base learner: inner model + pipeline + column subset."""

    spec: LearnerSpec
    model: object
    fitted_pipeline: FittedPipeline | None
    col_idx: np.ndarray | None

    def _design(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.col_idx is not None:
            X = X[:, self.col_idx]
        if self.fitted_pipeline is not None:
            X = transform(self.fitted_pipeline, X)
        return X

    def predict(self, X) -> np.ndarray:
        """Predictions on the original predictor scale; probabilities of
        class 1 for classification methods."""
        return self.model.predict(self._design(X))

    def to_dict(self):
        return {"spec": self.spec.to_dict(),
                "model": self.model.to_dict(),
                "pipeline": (self.fitted_pipeline.to_dict()
                             if self.fitted_pipeline is not None else None),
                "col_idx": (self.col_idx.tolist()
                            if self.col_idx is not None else None)}

    @classmethod
    def from_dict(cls, d):
        spec = LearnerSpec.from_dict(d["spec"])
        model = _MODEL_KINDS[d["model"]["kind"]].from_dict(d["model"])
        pipe = (FittedPipeline.from_dict(d["pipeline"])
                if d["pipeline"] is not None else None)
        col_idx = (np.asarray(d["col_idx"], dtype=np.int64)
                   if d["col_idx"] is not None else None)
        return cls(spec, model, pipe, col_idx)


def fit(spec: LearnerSpec, X, y, seed=0, colnames=None) -> FittedLearner:
    """Fit one base learner: subset columns, run the pipeline, dispatch."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y row counts differ")
    if np.isnan(y).any():
        raise DataError("outcome contains missing values")

    col_idx = None
    if spec.xvars is not None:
        if colnames is None:
            raise SpecError("xvars given but no column names supplied")
        lookup = {c: i for i, c in enumerate(colnames)}
        missing = [c for c in spec.xvars if c not in lookup]
        if missing:
            raise DataError(f"missing column {missing[0]!r}")
        col_idx = np.asarray([lookup[c] for c in spec.xvars], dtype=np.int64)
        X = X[:, col_idx]

    pipe_spec = spec.effective_pipeline()
    fitted_pipe = None
    if pipe_spec.steps:
        fitted_pipe, X = fit_transform(pipe_spec, X)
    if np.isnan(X).any():
        raise DataError(f"NaN predictors reached method {spec.method!r}; "
                        "add an imputer pipeline")

    opts = spec.resolved_options()
    method = spec.method
    if method == "ols":
        model = fit_ols(X, y, fit_intercept=opts["fit_intercept"])
    elif method == "logit":
        model = fit_logit(X, y, max_iter=opts["max_iter"], tol=opts["tol"])
    elif method in ("lassocv", "ridgecv", "elasticcv"):
        model = fit_elastic_net_cv(
            X, y, l1_ratio=opts["l1_ratio"], n_alphas=opts["n_alphas"],
            eps=opts["eps"], bfolds=opts["cv"], seed=derive_seed(seed, 11),
            task=spec.task, alphas=opts["alphas"], max_iter=opts["max_iter"],
            tol=opts["tol"], fit_intercept=opts["fit_intercept"])
    elif method == "lassoic":
        model = fit_lasso_ic(X, y, criterion=opts["criterion"],
                             n_alphas=opts["n_alphas"], eps=opts["eps"],
                             max_iter=opts["max_iter"], tol=opts["tol"])
    elif method == "rf":
        model = fit_random_forest(
            X, y, task=spec.task, n_estimators=opts["n_estimators"],
            max_depth=opts["max_depth"],
            min_samples_leaf=opts["min_samples_leaf"],
            max_features=opts["max_features"], max_samples=opts["max_samples"],
            bootstrap=opts["bootstrap"], seed=derive_seed(seed, 12))
    elif method == "gradboost":
        model = fit_gradient_boost(
            X, y, task=spec.task, learning_rate=opts["learning_rate"],
            n_estimators=opts["n_estimators"], max_depth=opts["max_depth"],
            subsample=opts["subsample"],
            min_samples_leaf=opts["min_samples_leaf"],
            seed=derive_seed(seed, 13))
    elif method in ("svm", "linsvm"):
        mode = "svr" if spec.task == REGRESS else "svc"
        model = fit_linear_svm(X, y, C=opts["C"],
                               epsilon=opts.get("epsilon", 0.1), mode=mode,
                               tol=opts["tol"], max_iter=opts["max_iter"],
                               seed=derive_seed(seed, 14))
    elif method == "nnet":
        model = fit_mlp(
            X, y, task=spec.task,
            hidden_layer_sizes=opts["hidden_layer_sizes"],
            activation=opts["activation"],
            learning_rate_init=opts["learning_rate_init"],
            batch_size=None if opts["batch_size"] == "auto" else opts["batch_size"],
            max_iter=opts["max_iter"], tol=opts["tol"],
            early_stopping=opts["early_stopping"],
            validation_fraction=opts["validation_fraction"],
            n_iter_no_change=opts["n_iter_no_change"],
            seed=derive_seed(seed, 15))
    else:  # pragma: no cover - registry guards this
        raise SpecError(f"unknown method {method!r}")
    return FittedLearner(spec, model, fitted_pipe, col_idx)


def predict(fitted: FittedLearner, X) -> np.ndarray:
    """Module-level alias for FittedLearner.predict."""
    return fitted.predict(X)
