"""Command-line front end.

Subcommands: fit, predict, table, graph, printopt. Two ways to declare base
learners:

  inline:  --methods "ols lassocv rf" --pipe2 poly2 --cmdopt3 "n_estimators(300)"
           (cmdoptN / pipeN / xvarsN bind to the N-th method)
  blocks:  --learner "m=lassocv pipe=poly2" --learner "m=rf opt='max_depth(8)'"

Learner option strings use key(value) pairs exactly as `printopt` prints
them. A TOML config file (--config) can stand in for flags; explicit flags
win on conflict. STACKGEN_SEED overrides the default seed policy when
--seed is absent.
"""

from __future__ import annotations

import hashlib
import os
import re
import shlex
import sys
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed
from .data import (CLASSIFY, REGRESS, Dataset, HoldoutMask, load_csv,
                   split_holdout)
from .errors import StackgenError
from .learners import LearnerSpec, default_options, format_options
from .pipeline import parse_pipeline
from .report import (confusion_table, default_holdout, emit_plots,
                     rmspe_table, weights_table)
from .stacking import (StackModel, StackSpec, fit_stack, load_model,
                       predict_base, predict_stack, resolve_master_seed,
                       save_model)

_STREAM_SPLIT = 4  # master-seed stream for --train-fraction

SUBCOMMANDS = ("fit", "predict", "table", "graph", "printopt")

_BOOL_FLAGS = ("voting", "table", "graph", "histogram", "printopt", "showopt",
               "xb", "pr", "basexb", "cvalid")
_VALUE_FLAGS = ("type", "methods", "finalest", "folds", "foldvar", "bfolds",
                "seed", "njobs", "voteweights", "out-model", "out-dir",
                "data", "outcome", "predictors", "model", "out", "threshold",
                "train", "train-fraction", "config")
_INDEXED = re.compile(r"^(cmdopt|pipe|xvars)(\d+)$")


class UsageError(StackgenError):
    """Bad command line; exits with status 2."""


@dataclass
class RunConfig:
    subcommand: str
    flags: dict = field(default_factory=dict)
    learner_blocks: list = field(default_factory=list)
    indexed: dict = field(default_factory=dict)  # (kind, N) -> string

    def flag(self, name, default=None):
        return self.flags.get(name, default)


def _parse_option_string(text: str) -> dict:
    """Parse 'key(value) key2(value2)' exactly as printopt prints them."""
    out = {}
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[i:])
        if not m:
            raise UsageError(f"malformed key(value) option near {text[i:]!r}")
        key = m.group(0)
        i += m.end()
        if i >= n or text[i] != "(":
            raise UsageError(f"option {key!r} is missing its (value)")
        close = text.find(")", i)
        if close < 0:
            raise UsageError(f"option {key!r} has an unclosed parenthesis")
        out[key] = text[i + 1:close].strip()
        i = close + 1
    return out


def parse_args(argv) -> RunConfig:
    """Parse the command line into a RunConfig (no validation of semantics
    that need data; method/option binding happens in build_spec)."""
    if not argv:
        raise UsageError("usage: stackgen {fit|predict|table|graph|printopt} "
                         "[flags]; see README")
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        raise UsageError(f"unknown subcommand {sub!r}; expected one of "
                         f"{', '.join(SUBCOMMANDS)}")
    cfg = RunConfig(sub)
    i = 1
    while i < len(argv):
        tok = argv[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        body = tok[2:]
        value = None
        if "=" in body:
            body, value = body.split("=", 1)
        m = _INDEXED.match(body)
        if m:
            kind, num = m.group(1), int(m.group(2))
            if value is None:
                i += 1
                if i >= len(argv):
                    raise UsageError(f"--{body} needs a value")
                value = argv[i]
            cfg.indexed[(kind, num)] = value
        elif body == "learner":
            if value is None:
                i += 1
                if i >= len(argv):
                    raise UsageError("--learner needs a block string")
                value = argv[i]
            cfg.learner_blocks.append(value)
        elif body == "holdout":
            cfg.flags["holdout"] = value if value is not None else True
        elif body in _BOOL_FLAGS:
            if value is not None:
                raise UsageError(f"--{body} takes no value")
            cfg.flags[body] = True
        elif body in _VALUE_FLAGS:
            if value is None:
                i += 1
                if i >= len(argv):
                    raise UsageError(f"--{body} needs a value")
                value = argv[i]
            cfg.flags[body] = value
        else:
            raise UsageError(f"unknown flag --{body}")
        i += 1

    config_path = cfg.flags.get("config")
    if config_path:
        _merge_config_file(cfg, config_path)
    return cfg


def _merge_config_file(cfg: RunConfig, path: str) -> None:
    try:
        import tomllib
    except ImportError:  # Python 3.10
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"missing config file: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad config file {path}: {exc}") from None
    for key, val in doc.items():
        if key == "learner":
            if not cfg.learner_blocks and not cfg.flags.get("methods"):
                for block in val:
                    parts = []
                    for bk, bv in block.items():
                        parts.append(f"{bk}={shlex.quote(str(bv))}")
                    cfg.learner_blocks.append(" ".join(parts))
            continue
        m = _INDEXED.match(key)
        if m:
            slot = (m.group(1), int(m.group(2)))
            cfg.indexed.setdefault(slot, str(val))
            continue
        if key == "holdout":
            cfg.flags.setdefault("holdout", val if isinstance(val, str) else bool(val))
            continue
        if key in _BOOL_FLAGS:
            if val:
                cfg.flags.setdefault(key, True)
            continue
        if key in _VALUE_FLAGS:
            cfg.flags.setdefault(key, str(val))
            continue
        raise UsageError(f"unknown config key {key!r}")


def _parse_learner_block(block: str) -> dict:
    out = {}
    for token in shlex.split(block):
        if "=" not in token:
            raise UsageError(f"learner block entries must be key=value, got "
                             f"{token!r}")
        key, val = token.split("=", 1)
        if key in ("m", "method"):
            out["method"] = val
        elif key in ("opt", "pipe", "xvars"):
            out[key] = val
        else:
            raise UsageError(f"unknown learner block key {key!r}")
    if "method" not in out:
        raise UsageError("each --learner block needs m=<method>")
    return out


def build_specs(cfg: RunConfig, task: str) -> list:
    """LearnerSpec list from either syntax (but not both)."""
    inline = cfg.flag("methods")
    if inline and cfg.learner_blocks:
        raise UsageError("use either --methods (with --cmdoptN/--pipeN/"
                         "--xvarsN) or repeated --learner blocks, not both")
    blocks = []
    if inline:
        methods = inline.split()
        if not methods:
            raise UsageError("--methods lists no learners")
        for (kind, num), _ in cfg.indexed.items():
            if num < 1 or num > len(methods):
                raise UsageError(f"option index out of range: --{kind}{num} "
                                 f"with {len(methods)} methods")
        for n, method in enumerate(methods, start=1):
            blocks.append({"method": method,
                           "opt": cfg.indexed.get(("cmdopt", n)),
                           "pipe": cfg.indexed.get(("pipe", n)),
                           "xvars": cfg.indexed.get(("xvars", n))})
    elif cfg.learner_blocks:
        if cfg.indexed:
            raise UsageError("--cmdoptN/--pipeN/--xvarsN belong to the "
                             "--methods syntax")
        blocks = [_parse_learner_block(b) for b in cfg.learner_blocks]
    else:
        raise UsageError("no base learners: pass --methods or --learner")

    specs = []
    for block in blocks:
        options = _parse_option_string(block["opt"]) if block.get("opt") else {}
        pipeline = parse_pipeline(block["pipe"]) if block.get("pipe") else ()
        xvars = tuple(block["xvars"].split()) if block.get("xvars") else None
        specs.append(LearnerSpec(block["method"], task, options,
                                 pipeline if pipeline else (), xvars))
    return specs


def _resolve_task(cfg: RunConfig) -> str:
    raw = cfg.flag("type", "regress")
    if raw in ("reg", "regress", "regression"):
        return REGRESS
    if raw in ("class", "classify", "classification"):
        return CLASSIFY
    raise UsageError(f"--type must be reg(ress) or class(ify), got {raw!r}")


def _seed_policy(cfg: RunConfig) -> int:
    raw = cfg.flag("seed")
    if raw is None:
        raw = os.environ.get("STACKGEN_SEED")
    if raw is None:
        return -1
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"--seed must be an integer, got {raw!r}") from None


def _file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_data_for(cfg: RunConfig, task: str) -> Dataset:
    path = cfg.flag("data")
    if not path:
        raise UsageError("--data is required")
    outcome = cfg.flag("outcome")
    if not outcome:
        raise UsageError("--outcome is required")
    predictors = cfg.flag("predictors")
    predictors = predictors.split() if predictors else None
    return load_csv(path, outcome, predictors, task)


def _column_values(path: str, column: str) -> np.ndarray:
    import csv as _csv
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        header = [h.strip() for h in header]
        if column not in header:
            raise UsageError(f"missing column {column!r} in {path}")
        pos = header.index(column)
        vals = []
        for row in reader:
            cell = row[pos].strip()
            vals.append(float("nan") if cell in ("", "NA") else float(cell))
    return np.asarray(vals)


def _resolve_train_mask(cfg: RunConfig, data: Dataset, master_seed: int):
    train_col = cfg.flag("train")
    frac = cfg.flag("train-fraction")
    if train_col and frac:
        raise UsageError("--train and --train-fraction are mutually exclusive")
    if train_col:
        vals = _column_values(cfg.flag("data"), train_col)
        mask = ~np.isnan(vals) & (vals != 0.0)
        return HoldoutMask(mask)
    if frac:
        return split_holdout(data.n, float(frac),
                             derive_seed(master_seed, _STREAM_SPLIT))
    return None


def _resolve_holdout(cfg: RunConfig, model: StackModel, data: Dataset):
    spec = cfg.flag("holdout")
    if spec is None:
        return None
    if spec is True:
        return default_holdout(model, data)
    vals = _column_values(cfg.flag("data"), spec)
    hold = ~np.isnan(vals) & (vals != 0.0)
    if not hold.any():
        raise UsageError(f"holdout column {spec!r} marks no rows")
    return HoldoutMask(~hold)


def _check_hash(model: StackModel, cfg: RunConfig) -> None:
    stored = model.meta.get("data_hash")
    path = cfg.flag("data")
    if stored and path and _file_hash(path) != stored:
        raise StackgenError(
            "data file changed since the model was fit; predictions and "
            "report replays require the original estimation file")


def _emit_table(model, data, holdout, cfg, out) -> None:
    if holdout is not None:
        print(f"Number of holdout observations: {holdout.n_holdout}", file=out)
        print(file=out)
    if model.task == REGRESS:
        rep = rmspe_table(model, data, holdout)
    else:
        thr = float(cfg.flag("threshold", 0.5))
        rep = confusion_table(model, data, holdout, threshold=thr)
    print(rep.format(), file=out)


def _cmd_printopt(cfg: RunConfig, out) -> int:
    task = _resolve_task(cfg)
    methods = (cfg.flag("methods") or "").split()
    if not methods and cfg.learner_blocks:
        methods = [_parse_learner_block(b)["method"] for b in cfg.learner_blocks]
    if len(methods) != 1:
        raise UsageError("printopt needs exactly one method")
    print("Default options:", file=out)
    print(format_options(default_options(methods[0], task)), file=out)
    return 0


def _cmd_fit(cfg: RunConfig, out) -> int:
    if cfg.flag("printopt"):
        return _cmd_printopt(cfg, out)
    task = _resolve_task(cfg)
    specs = build_specs(cfg, task)
    if cfg.flag("showopt"):
        for n, spec in enumerate(specs, start=1):
            print(f"Learner {n}: {spec.method} (type {spec.task})", file=out)
            resolved = spec.resolved_options()
            print("  options: " + " ".join(
                f"{k}({v})" for k, v in resolved.items()), file=out)
            if spec.effective_pipeline().steps:
                print(f"  pipeline: {spec.effective_pipeline().describe()}",
                      file=out)
            if spec.xvars:
                print(f"  xvars: {' '.join(spec.xvars)}", file=out)

    data = _load_data_for(cfg, task)
    policy = _seed_policy(cfg)
    master_seed = resolve_master_seed(policy)
    mask = _resolve_train_mask(cfg, data, master_seed)

    foldvar = None
    if cfg.flag("foldvar"):
        foldvar = tuple(_column_values(cfg.flag("data"), cfg.flag("foldvar")).tolist())

    voteweights = None
    if cfg.flag("voteweights"):
        voteweights = tuple(float(v) for v in cfg.flag("voteweights").split())

    spec = StackSpec(tuple(specs), task=task,
                     finalest=cfg.flag("finalest", "nnls1"),
                     folds=int(cfg.flag("folds", 5)),
                     foldvar=foldvar,
                     bfolds=int(cfg.flag("bfolds", 5)),
                     seed=policy,
                     njobs=int(cfg.flag("njobs", 0)),
                     voting=bool(cfg.flag("voting", False)),
                     voteweights=voteweights)

    meta = {"data_path": os.path.abspath(cfg.flag("data")),
            "data_hash": _file_hash(cfg.flag("data")),
            "outcome": cfg.flag("outcome"),
            "predictors": list(data.colnames),
            "n_rows": data.n}
    model = fit_stack(spec, data, mask, meta, master_seed=master_seed)

    if model.J == 1:
        print("Single base learner: no stacking done.", file=out)
        print(file=out)
    print(weights_table(model), file=out)

    model_path = cfg.flag("out-model", "stackgen_model.json")
    save_model(model, model_path)

    if cfg.flag("table") or cfg.flag("graph"):
        holdout = _resolve_holdout(cfg, model, data)
        if cfg.flag("table"):
            print(file=out)
            _emit_table(model, data, holdout, cfg, out)
        if cfg.flag("graph"):
            emit_plots(model, data, holdout, cfg.flag("out-dir", "."),
                       histogram=bool(cfg.flag("histogram", False)))
    return 0


def _load_model_and_data(cfg: RunConfig):
    model_path = cfg.flag("model")
    if not model_path:
        raise UsageError("--model is required")
    model = load_model(model_path)
    if not cfg.flag("outcome") and model.meta.get("outcome"):
        cfg.flags["outcome"] = model.meta["outcome"]
    if not cfg.flag("predictors") and model.meta.get("predictors"):
        cfg.flags["predictors"] = " ".join(model.meta["predictors"])
    data = _load_data_for(cfg, model.task)
    _check_hash(model, cfg)
    return model, data


def _cmd_predict(cfg: RunConfig, out) -> int:
    model, data = _load_model_and_data(cfg)
    out_path = cfg.flag("out", "predictions.csv")
    columns: list[tuple[str, np.ndarray | None]] = []
    wants_base = cfg.flag("basexb")
    wants_cv = cfg.flag("cvalid")
    if cfg.flag("pr"):
        columns.append(("pr", predict_stack(model, data.X, kind="pr")))
    if cfg.flag("xb") or not (cfg.flag("pr") or wants_base or wants_cv):
        kind = "xb"
        columns.append(("xb", predict_stack(model, data.X, kind=kind)))
    if wants_base:
        P = predict_base(model, data.X, source="refit")
        for j in range(model.J):
            columns.append((f"basexb{j + 1}", P[:, j]))
    if wants_cv:
        Zfull = np.full((data.n, model.J), np.nan)
        Zfull[model.train_row_ids] = predict_base(
            model, source="cvalid", row_ids=model.train_row_ids)
        for j in range(model.J):
            columns.append((f"cvalid{j + 1}", Zfull[:, j]))

    import csv as _csv
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        wr = _csv.writer(fh)
        wr.writerow(["row"] + [name for name, _ in columns])
        for i in range(data.n):
            row = [i]
            for _, vec in columns:
                v = vec[i]
                row.append("" if np.isnan(v) else repr(float(v)))
            wr.writerow(row)
    print(f"wrote {out_path}", file=out)
    return 0


def _cmd_table(cfg: RunConfig, out) -> int:
    model, data = _load_model_and_data(cfg)
    holdout = _resolve_holdout(cfg, model, data)
    _emit_table(model, data, holdout, cfg, out)
    return 0


def _cmd_graph(cfg: RunConfig, out) -> int:
    model, data = _load_model_and_data(cfg)
    holdout = _resolve_holdout(cfg, model, data)
    if holdout is not None:
        print(f"Number of holdout observations: {holdout.n_holdout}", file=out)
    paths = emit_plots(model, data, holdout, cfg.flag("out-dir", "."),
                       histogram=bool(cfg.flag("histogram", False)))
    for p in paths:
        print(f"wrote {p}", file=out)
    return 0


def run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if cfg.subcommand == "printopt":
        return _cmd_printopt(cfg, out)
    if cfg.subcommand == "fit":
        return _cmd_fit(cfg, out)
    if cfg.subcommand == "predict":
        return _cmd_predict(cfg, out)
    if cfg.subcommand == "table":
        return _cmd_table(cfg, out)
    if cfg.subcommand == "graph":
        return _cmd_graph(cfg, out)
    raise UsageError(f"unknown subcommand {cfg.subcommand!r}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StackgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
