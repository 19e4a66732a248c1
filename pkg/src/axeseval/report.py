"""Markdown tables from results files, one table per axis.

Rows are models (first-appearance order), columns are tasks or transforms
with the metric and its direction. Cells are means over seeds at three
decimals; the best cell per column is bold (max for up-metrics, min for
down-metrics, ties all bold). Rows may be declared as variants of a base
model: variants sit below the main rows, never compete for bold, and get
an asterisk where they beat their base.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import EmptyError

_UP = "↑"
_DOWN = "↓"

_METRIC_LABEL = {"accuracy": "Acc", "mse": "MSE", "f1_track": "F1",
                 "cosine": "Cos sim", "mig": "MIG"}


def _direction(axis: str, metric: str) -> str:
    if axis == "disentanglement_delta":
        return _DOWN
    if axis == "p_equivariance":
        return _DOWN
    if metric == "mse":
        return _DOWN
    return _UP


def load_results(path) -> list:
    path = Path(path)
    if not path.exists():
        raise EmptyError(f"results file not found: {path}")
    objs = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            objs.append(json.loads(line))
    return objs


def emit_table(results_path, axis: str, variants: dict | None = None) -> str:
    """Render one axis as a deterministic markdown table.

    variants maps a variant model name to its base model name.
    """
    variants = dict(variants or {})
    rows = [o for o in load_results(results_path) if o["axis"] == axis]
    if not rows:
        raise EmptyError(f"results contain no '{axis}' entries")

    columns = []            # (stream, task) in first-appearance order
    col_meta = {}
    models = []
    for obj in rows:
        key = (obj["stream"], obj["task"])
        if key not in col_meta:
            columns.append(key)
            col_meta[key] = obj["metric"]
        if obj["model"] not in models:
            models.append(obj["model"])

    main_models = [m for m in models if m not in variants]
    variant_models = [m for m in models if m in variants]

    cells = {}
    for key in columns:
        for model in models:
            values = [o["value"] for o in rows
                      if (o["stream"], o["task"]) == key and o["model"] == model]
            if values:
                cells[(model, key)] = float(np.mean(values))

    best = {}
    for key in columns:
        has = [cells[(m, key)] for m in main_models if (m, key) in cells]
        if has:
            down = _direction(axis, col_meta[key]) == _DOWN
            best[key] = min(has) if down else max(has)

    def _fmt(model, key):
        if (model, key) not in cells:
            return "n/a"
        value = cells[(model, key)]
        text = f"{value:.3f}"
        if model in variants:
            base = variants[model]
            if (base, key) in cells:
                down = _direction(axis, col_meta[key]) == _DOWN
                beats = value < cells[(base, key)] if down \
                    else value > cells[(base, key)]
                if beats:
                    text += "*"
            return text
        if key in best and value == best[key]:
            return f"**{text}**"
        return text

    headers = ["Model"]
    for key in columns:
        stream, task = key
        metric = _METRIC_LABEL.get(col_meta[key], col_meta[key])
        headers.append(f"{task} ({stream}) {metric} {_direction(axis, col_meta[key])}")

    lines = ["| " + " | ".join(headers) + " |",
             "| " + " | ".join("---" for _ in headers) + " |"]
    for model in main_models + variant_models:
        row = [model] + [_fmt(model, key) for key in columns]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
