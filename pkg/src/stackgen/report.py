"""Evaluation tables and plot artifacts.

Regression reports root mean-squared prediction error (RMSPE) per method
over three partitions: in-sample (full-sample refits), CV (the cross-fitted
matrix), and an optional holdout. Classification reports combined confusion
matrices in the same layout, ROC curves, and AUC. Plots are written as
self-contained SVG plus CSV files with fixed schemas:

  scatter: observed,predicted,learner,partition
  roc:     fpr,tpr,threshold,learner,partition
  hist:    learner,partition,bin_low,bin_high,count
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .data import CLASSIFY, REGRESS, Dataset, HoldoutMask
from .errors import DataError, SpecError
from .stacking import StackModel, predict_base

STACK_LABEL = "STACKING"


# ---------------------------------------------------------------------------
# metric helpers

def rmspe(y, pred) -> float:
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    return float(np.sqrt(np.mean((y - pred) ** 2)))


def confusion_counts(y, p, threshold=0.5) -> np.ndarray:
    """2x2 counts indexed [predicted class, actual class]."""
    y = np.asarray(y)
    hard = np.asarray(p) >= threshold
    out = np.empty((2, 2), dtype=np.int64)
    for pred_c in (0, 1):
        for act_c in (0, 1):
            out[pred_c, act_c] = int(np.sum((hard == bool(pred_c)) & (y == act_c)))
    return out


def roc_curve(scores, labels):
    """ROC staircase points [(fpr, tpr, threshold), ...] and trapezoid AUC.

    One point per distinct score threshold (ties grouped, which makes the
    trapezoid rule equal to the tie-adjusted rank statistic)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = float(np.sum(labels == 1))
    n_neg = float(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    yl = labels[order]
    points = [(0.0, 0.0, float("inf"))]
    tp = fp = 0.0
    auc = 0.0
    prev_fpr, prev_tpr = 0.0, 0.0
    i = 0
    n = s.shape[0]
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            tp += yl[j]
            fp += 1.0 - yl[j]
            j += 1
        fpr = fp / n_neg
        tpr = tp / n_pos
        points.append((fpr, tpr, float(s[i])))
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        prev_fpr, prev_tpr = fpr, tpr
        i = j
    return points, float(auc)


def default_holdout(model: StackModel, data: Dataset) -> HoldoutMask:
    """All loaded rows outside the estimation sample."""
    mask = np.zeros(data.n, dtype=bool)
    mask[model.train_row_ids] = True
    if mask.all():
        raise DataError("holdout evaluation will not work: the estimation "
                        "was run on the whole sample")
    return HoldoutMask(mask)


# ---------------------------------------------------------------------------
# evaluation report

@dataclass
class EvalReport:
    """Per-method metrics over the available partitions.

    rows: [{label, weight (None for the stacking row), metrics {partition:
    value}}] where a value is an RMSPE float (regression) or a 2x2 count
    matrix (classification). Partition order: in_sample, cv, holdout.
    """

    task: str
    rows: list
    partitions: list
    holdout_n: int | None = None
    threshold: float | None = None

    def format(self) -> str:
        if self.task == REGRESS:
            return self._format_rmspe()
        return self._format_confusion()

    def _headers(self):
        names = {"in_sample": "In-Sample", "cv": "CV", "holdout": "Holdout"}
        return [names[p] for p in self.partitions]

    def _format_rmspe(self) -> str:
        title = "RMSPE: " + ", ".join(self._headers())
        lines = [title, "-" * 17 + "+" + "-" * (13 * len(self.partitions) + 8)]
        header = "  {:<15}|".format("Method") + " Weight "
        for h in self._headers():
            header += f"{h:>12} "
        lines.append(header)
        lines.append(lines[1])
        for row in self.rows:
            w = "   . " if row["weight"] is None else f"{row['weight']:5.3f}"
            line = "  {:<15}|".format(row["label"]) + f" {w}  "
            for p in self.partitions:
                line += f"{row['metrics'][p]:>12.3f} "
            lines.append(line)
        return "\n".join(lines)

    def _format_confusion(self) -> str:
        title = "Confusion matrix: " + ", ".join(self._headers())
        width = 18 * len(self.partitions) + 8
        lines = [title, "-" * 17 + "+" + "-" * width]
        h1 = "  {:<15}|".format("Method") + " Weight "
        h2 = "  {:<15}|".format("") + "        "
        for h in self._headers():
            h1 += f"{h:^17} "
            h2 += f"{'0':>8}{'1':>8}  "
        lines.append(h1)
        lines.append(h2)
        lines.append(lines[1])
        for row in self.rows:
            w = "   . " if row["weight"] is None else f"{row['weight']:5.3f}"
            for pred_c in (0, 1):
                line = "  {:<13}{} |".format(row["label"], pred_c) + f" {w}  "
                for p in self.partitions:
                    counts = row["metrics"][p]
                    line += f"{counts[pred_c, 0]:>8}{counts[pred_c, 1]:>8}  "
                lines.append(line)
        return "\n".join(lines)


def _collect_predictions(model: StackModel, data: Dataset,
                         holdout: HoldoutMask | None):
    """(partition -> (y, per-method prediction dict)) for STACKING + learners."""
    train_ids = model.train_row_ids
    if train_ids.max() >= data.n:
        raise DataError("model's training rows are missing from the data")
    X_tr = data.X[train_ids]
    y_tr = data.y[train_ids]
    labels = model.method_labels()

    def method_map(P, stacked):
        out = {STACK_LABEL: stacked}
        for j, lab in enumerate(labels):
            out[(j, lab)] = P[:, j]
        return out

    P_in = predict_base(model, X_tr, source="refit")
    parts = {"in_sample": (y_tr, method_map(P_in, model.combine(P_in))),
             "cv": (y_tr, method_map(model.Z, model.combine(model.Z)))}
    if holdout is not None:
        if holdout.in_train.shape[0] != data.n:
            raise DataError("holdout mask length does not match the data")
        hold_ids = np.flatnonzero(~holdout.in_train)
        if hold_ids.size == 0:
            raise DataError("holdout evaluation will not work: the estimation "
                            "was run on the whole sample")
        X_h = data.X[hold_ids]
        P_h = predict_base(model, X_h, source="refit")
        parts["holdout"] = (data.y[hold_ids], method_map(P_h, model.combine(P_h)))
    return parts


def _weight_rows(model: StackModel):
    rows = [(STACK_LABEL, None)]
    for j, lab in enumerate(model.method_labels()):
        rows.append(((j, lab), float(model.final.weights[j]) if model.J > 1
                     else 1.0))
    return rows


def rmspe_table(model: StackModel, data: Dataset,
                holdout: HoldoutMask | None = None) -> EvalReport:
    """RMSPE per method over in-sample, CV, and optional holdout partitions."""
    if model.task != REGRESS:
        raise SpecError("rmspe_table is for regression; use confusion_table")
    parts = _collect_predictions(model, data, holdout)
    rows = []
    for key, weight in _weight_rows(model):
        metrics = {p: rmspe(y, preds[key]) for p, (y, preds) in parts.items()}
        label = key if isinstance(key, str) else key[1]
        rows.append({"label": label, "weight": weight, "metrics": metrics})
    holdout_n = holdout.n_holdout if holdout is not None else None
    return EvalReport(REGRESS, rows, list(parts.keys()), holdout_n)


def confusion_table(model: StackModel, data: Dataset,
                    holdout: HoldoutMask | None = None,
                    threshold: float = 0.5) -> EvalReport:
    """Combined confusion matrices (two rows per method: predicted 0 and
    predicted 1; columns are actual 0/1) per partition."""
    if model.task != CLASSIFY:
        raise SpecError("confusion_table is for classification; use rmspe_table")
    parts = _collect_predictions(model, data, holdout)
    rows = []
    for key, weight in _weight_rows(model):
        metrics = {}
        for p, (y, preds) in parts.items():
            prob = np.clip(preds[key], 0.0, 1.0) if key == STACK_LABEL else preds[key]
            metrics[p] = confusion_counts(y, prob, threshold)
        label = key if isinstance(key, str) else key[1]
        rows.append({"label": label, "weight": weight, "metrics": metrics})
    holdout_n = holdout.n_holdout if holdout is not None else None
    return EvalReport(CLASSIFY, rows, list(parts.keys()), holdout_n, threshold)


def weights_table(model: StackModel) -> str:
    """The stacking-weights table printed after fitting."""
    lines = ["Stacking weights:",
             "-" * 17 + "+" + "-" * 21,
             "  {:<15}|{:>12}".format("Method", "Weight"),
             "-" * 17 + "+" + "-" * 21]
    weights = model.final.weights if model.J > 1 else np.ones(1)
    for lab, w in zip(model.method_labels(), weights):
        lines.append("  {:<15}|{:>15.7f}".format(lab, w))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# plot artifacts

def _svg(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            '<rect width="100%" height="100%" fill="white"/>\n'
            + body + "\n</svg>\n")


def _panel(x0, y0, w, h, caption):
    parts = [f'<g transform="translate({x0},{y0})">',
             f'<rect x="0" y="0" width="{w}" height="{h}" fill="none" '
             'stroke="black" stroke-width="1"/>',
             f'<text x="{w/2:.1f}" y="-6" text-anchor="middle" '
             f'font-size="12">{caption}</text>']
    return parts


_PANEL_W, _PANEL_H, _MARGIN = 220, 220, 46


def _grid_layout(n_panels):
    cols = min(3, n_panels)
    rows_n = (n_panels + cols - 1) // cols
    width = cols * (_PANEL_W + _MARGIN) + _MARGIN
    height = rows_n * (_PANEL_H + _MARGIN) + _MARGIN
    return cols, width, height


def _scatter_svg(panels, title):
    """panels: [(caption, observed, predicted)]"""
    cols, width, height = _grid_layout(len(panels))
    body = [f'<text x="{width/2:.0f}" y="18" text-anchor="middle" '
            f'font-size="14">{title}</text>']
    for i, (caption, obs, pred) in enumerate(panels):
        x0 = _MARGIN + (i % cols) * (_PANEL_W + _MARGIN)
        y0 = _MARGIN + (i // cols) * (_PANEL_H + _MARGIN)
        lo = float(min(obs.min(), pred.min()))
        hi = float(max(obs.max(), pred.max()))
        span = hi - lo or 1.0

        def sx(v):
            return (v - lo) / span * _PANEL_W

        def sy(v):
            return _PANEL_H - (v - lo) / span * _PANEL_H

        parts = _panel(x0, y0, _PANEL_W, _PANEL_H, caption)
        ylo, yhi = float(obs.min()), float(obs.max())
        parts.append(f'<line x1="{sx(ylo):.2f}" y1="{sy(ylo):.2f}" '
                     f'x2="{sx(yhi):.2f}" y2="{sy(yhi):.2f}" stroke="black"/>')
        for o, pr in zip(obs, pred):
            parts.append(f'<circle cx="{sx(o):.2f}" cy="{sy(pr):.2f}" r="1.5" '
                         'fill="steelblue" fill-opacity="0.5"/>')
        parts.append("</g>")
        body.extend(parts)
    return _svg(width, height, "\n".join(body))


def _roc_svg(panels, title):
    """panels: [(caption, points, auc)]"""
    cols, width, height = _grid_layout(len(panels))
    body = [f'<text x="{width/2:.0f}" y="18" text-anchor="middle" '
            f'font-size="14">{title}</text>']
    for i, (caption, points, auc) in enumerate(panels):
        x0 = _MARGIN + (i % cols) * (_PANEL_W + _MARGIN)
        y0 = _MARGIN + (i // cols) * (_PANEL_H + _MARGIN)
        parts = _panel(x0, y0, _PANEL_W, _PANEL_H, caption)
        parts.append(f'<line x1="0" y1="{_PANEL_H}" x2="{_PANEL_W}" y2="0" '
                     'stroke="gray" stroke-dasharray="4 3"/>')
        coords = " ".join(f"{fpr * _PANEL_W:.2f},{(1 - tpr) * _PANEL_H:.2f}"
                          for fpr, tpr, _ in points)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     'stroke="firebrick" stroke-width="1.5"/>')
        parts.append(f'<text x="{_PANEL_W/2:.1f}" y="{_PANEL_H + 16}" '
                     f'text-anchor="middle" font-size="11">AUC = {auc:.4f}</text>')
        parts.append("</g>")
        body.extend(parts)
    return _svg(width, height, "\n".join(body))


def _hist_svg(panels, title, n_bins=20):
    cols, width, height = _grid_layout(len(panels))
    body = [f'<text x="{width/2:.0f}" y="18" text-anchor="middle" '
            f'font-size="14">{title}</text>']
    for i, (caption, counts) in enumerate(panels):
        x0 = _MARGIN + (i % cols) * (_PANEL_W + _MARGIN)
        y0 = _MARGIN + (i // cols) * (_PANEL_H + _MARGIN)
        parts = _panel(x0, y0, _PANEL_W, _PANEL_H, caption)
        peak = max(int(counts.max()), 1)
        bw = _PANEL_W / n_bins
        for b in range(n_bins):
            bh = counts[b] / peak * (_PANEL_H - 4)
            parts.append(f'<rect x="{b * bw:.2f}" y="{_PANEL_H - bh:.2f}" '
                         f'width="{bw:.2f}" height="{bh:.2f}" fill="steelblue" '
                         'stroke="white" stroke-width="0.5"/>')
        parts.append("</g>")
        body.extend(parts)
    return _svg(width, height, "\n".join(body))


def emit_plots(model: StackModel, data: Dataset,
               holdout: HoldoutMask | None = None, out_dir: str = ".",
               histogram: bool = False, title: str | None = None) -> list:
    """Write plot data (CSV) and rendered SVG files; returns written paths.

    Regression: per-method observed-vs-predicted scatter with a 45-degree
    reference line. Classification: per-method ROC curves with AUC captions,
    plus optional 20-bin probability histograms.
    """
    if not os.path.isdir(out_dir):
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create output directory {out_dir}: {exc}")
    parts = _collect_predictions(model, data, holdout)
    labels = [STACK_LABEL] + [f"{lab}{j + 1}" for j, lab in
                              enumerate(model.method_labels())]
    keys = [STACK_LABEL] + [(j, lab) for j, lab in
                            enumerate(model.method_labels())]
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    if model.task == REGRESS:
        with open(path("scatter.csv"), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["observed", "predicted", "learner", "partition"])
            for part, (y, preds) in parts.items():
                for lab, key in zip(labels, keys):
                    for o, pr in zip(y, preds[key]):
                        wr.writerow([repr(float(o)), repr(float(pr)), lab, part])
        for part, (y, preds) in parts.items():
            if part == "cv":
                continue
            panels = [(lab, y, np.asarray(preds[key]))
                      for lab, key in zip(labels, keys)]
            head = title or "Predicted vs observed"
            with open(path(f"scatter_{part}.svg"), "w", encoding="utf-8") as fh:
                fh.write(_scatter_svg(panels, f"{head} ({part})"))
        return written

    with open(path("roc.csv"), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["fpr", "tpr", "threshold", "learner", "partition"])
        for part, (y, preds) in parts.items():
            for lab, key in zip(labels, keys):
                points, _ = roc_curve(np.asarray(preds[key]), y)
                for fpr, tpr, thr in points:
                    wr.writerow([repr(fpr), repr(tpr), repr(thr), lab, part])
    for part, (y, preds) in parts.items():
        if part == "cv":
            continue
        panels = []
        for lab, key in zip(labels, keys):
            points, auc = roc_curve(np.asarray(preds[key]), y)
            panels.append((lab, points, auc))
        head = title or "ROC"
        with open(path(f"roc_{part}.svg"), "w", encoding="utf-8") as fh:
            fh.write(_roc_svg(panels, f"{head} ({part})"))
    if histogram:
        edges = np.linspace(0.0, 1.0, 21)
        with open(path("hist.csv"), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["learner", "partition", "bin_low", "bin_high", "count"])
            for part, (y, preds) in parts.items():
                for lab, key in zip(labels, keys):
                    prob = np.clip(np.asarray(preds[key]), 0.0, 1.0)
                    counts, _ = np.histogram(prob, bins=edges)
                    for b in range(20):
                        wr.writerow([lab, part, repr(float(edges[b])),
                                     repr(float(edges[b + 1])), int(counts[b])])
        for part, (y, preds) in parts.items():
            if part == "cv":
                continue
            panels = []
            for lab, key in zip(labels, keys):
                prob = np.clip(np.asarray(preds[key]), 0.0, 1.0)
                counts, _ = np.histogram(prob, bins=edges)
                panels.append((lab, counts))
            head = title or "Predicted probabilities"
            with open(path(f"hist_{part}.svg"), "w", encoding="utf-8") as fh:
                fh.write(_hist_svg(panels, f"{head} ({part})"))
    return written
