"""Evaluation axes over a loaded dataset.

informativeness: probe a stream for a task and report the task metric on
the test split. p_equivariance: predict a transform's normalized parameter
from the (clean, transformed) embedding pair. r_equivariance: predict the
transformed embedding from the clean one plus the parameter, scored by
cosine similarity. invariance: probe-free mean cosine between clean and
transformed embeddings. disentanglement_delta: absolute change of the task
metric when the probe additionally receives the complementary stream.
mig: simplified binned-MI mutual information gap cross-check.

Probing-based axes use clean records only (transformed views carry copied
base labels); pair-based axes use clean/transformed view pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import datamodel as dm
from .errors import ConfigError, DegenerateError, EmptyError, ZeroVectorError
from .metrics import metric_accuracy, metric_cosine, metric_f1_track, metric_mse
from .probes import ProbeSpec, predict, train_probe

AXES = ("informativeness", "p_equivariance", "r_equivariance", "invariance",
        "disentanglement_delta", "mig")

TASK_TARGETS = ("instrument_class", "pitch_class", "chord_type",
                "tempo_regression", "multipitch")
_TARGET_FIELD = {
    "instrument_class": "instrument_id",
    "pitch_class": "pitch_class",
    "chord_type": "chord_type",
    "tempo_regression": "tempo_bpm",
    "multipitch": "pianoroll",
}
_TARGET_METRIC = {
    "instrument_class": "accuracy",
    "pitch_class": "accuracy",
    "chord_type": "accuracy",
    "tempo_regression": "mse",
    "multipitch": "f1_track",
}

_OVERRIDE_KEYS = {"max_epochs", "patience", "batch_size", "learning_rate",
                  "hidden_dim", "improvement_eps"}

MIG_BINS = 20
PARAM_VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class TaskSpec:
    name: str
    stream: str
    target: str
    metric: str

    def __post_init__(self):
        if self.stream not in dm.STREAMS:
            raise ConfigError(f"task '{self.name}': unknown stream '{self.stream}'")
        if self.target not in TASK_TARGETS:
            raise ConfigError(f"task '{self.name}': unknown target '{self.target}'")
        expected = _TARGET_METRIC[self.target]
        if self.metric != expected:
            raise ConfigError(
                f"task '{self.name}': target '{self.target}' requires metric "
                f"'{expected}', got '{self.metric}'"
            )

    @property
    def label_field(self) -> str:
        return _TARGET_FIELD[self.target]


@dataclass
class AxisResult:
    axis: str
    task: str
    stream: str
    value: float
    metric: str
    seed: int
    config_fingerprint: str
    sample_count: int
    model: str = ""
    extra: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "axis": self.axis,
            "config_fingerprint": self.config_fingerprint,
            "extra": dict(self.extra),
            "metric": self.metric,
            "model": self.model,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "stream": self.stream,
            "task": self.task,
            "value": self.value,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "AxisResult":
        return cls(
            axis=obj["axis"],
            task=obj["task"],
            stream=obj["stream"],
            value=obj["value"],
            metric=obj["metric"],
            seed=obj["seed"],
            config_fingerprint=obj["config_fingerprint"],
            sample_count=obj["sample_count"],
            model=obj.get("model", ""),
            extra=dict(obj.get("extra", {})),
        )


def result_sort_key(obj: dict):
    return (obj["axis"], obj["stream"], obj["task"], obj.get("model", ""),
            obj["seed"])


def make_fingerprint(manifest: dm.DatasetManifest, **parts) -> str:
    payload = {"dataset": manifest.dataset_hash, "engine": 1, **parts}
    return hashlib.sha256(dm.canonical_json(payload).encode()).hexdigest()[:16]


def resolve_probe_spec(kind: str, input_dim: int, output_dim: int, seed: int,
                       overrides: dict | None) -> ProbeSpec:
    overrides = dict(overrides or {})
    unknown = set(overrides) - _OVERRIDE_KEYS
    if unknown:
        raise ConfigError(f"unknown probe overrides {sorted(unknown)}")
    if kind != "mlp_multilabel":
        overrides.pop("hidden_dim", None)
    return ProbeSpec(kind=kind, input_dim=input_dim, output_dim=output_dim,
                     seed=seed, **overrides)


def _spec_obj(spec: ProbeSpec) -> dict:
    return {
        "kind": spec.kind, "input_dim": spec.input_dim,
        "output_dim": spec.output_dim, "hidden_dim": spec.hidden_dim,
        "max_epochs": spec.max_epochs, "patience": spec.patience,
        "batch_size": spec.batch_size, "learning_rate": spec.learning_rate,
        "improvement_eps": spec.improvement_eps,
    }


# ---------------------------------------------------------------------------
# data assembly
# ---------------------------------------------------------------------------

def _pooled_row(manifest, item_id, stream) -> np.ndarray:
    return dm.pool_time(manifest.embedding(item_id, stream)).data[0]


def _concat_row(manifest, item_id) -> np.ndarray:
    timbre = dm.pool_time(manifest.embedding(item_id, "timbre"))
    structure = dm.pool_time(manifest.embedding(item_id, "structure"))
    return dm.concat_streams(timbre, structure).data[0]


def _split_sets(manifest, task: TaskSpec):
    """Clean records with the task label, grouped by split."""
    out = {split: [] for split in dm.SPLITS}
    for rec in manifest.clean_records():
        if rec.labels.get(task.label_field) is None:
            continue
        out[rec.split].append(rec)
    for split in dm.SPLITS:
        if not out[split]:
            raise DegenerateError(
                f"task '{task.name}': no labeled items in split '{split}'"
            )
    return out


def _global_xy(manifest, task, records, mode):
    if mode == "concat":
        x = np.stack([_concat_row(manifest, r.item_id) for r in records])
    else:
        x = np.stack([_pooled_row(manifest, r.item_id, task.stream)
                      for r in records])
    y = np.array([records[i].labels.get(task.label_field)
                  for i in range(len(records))])
    return x.astype(np.float64), y


def _frame_xy(manifest, task, records, mode):
    """Per-frame rows for multipitch: X (frames, D), rolls, item frame spans."""
    xs, rolls, spans, start = [], [], [], 0
    for rec in records:
        emb = manifest.embedding(rec.item_id, task.stream)
        frames = emb.data.astype(np.float64)
        if mode == "concat":
            other = "structure" if task.stream == "timbre" else "timbre"
            pooled = _pooled_row(manifest, rec.item_id, other)
            broadcast = np.repeat(pooled[None, :], frames.shape[0], axis=0)
            if task.stream == "timbre":
                frames = np.concatenate([frames, broadcast], axis=1)
            else:
                frames = np.concatenate([broadcast, frames], axis=1)
        xs.append(frames)
        rolls.append(dm.align_pianoroll(rec.labels, emb.frames))
        spans.append((start, start + frames.shape[0]))
        start += frames.shape[0]
    return np.concatenate(xs), np.concatenate(rolls).astype(np.float64), spans


def _n_classes(manifest, task, splits):
    if task.target == "instrument_class":
        declared = manifest.header.labels.get("instrument_classes")
        if declared:
            return int(declared)
    top = max(r.labels.get(task.label_field)
              for recs in splits.values() for r in recs)
    return int(top) + 1


def _task_metric_value(task, probe, manifest, splits, data, norm):
    """Evaluate the task metric on the test split."""
    if task.target == "multipitch":
        x_test, _, spans = data["test"]
        _, binary = predict(probe, x_test)
        preds, truths, groups = [], [], []
        for rec, (a, b) in zip(splits["test"], spans):
            emb_frames = b - a
            preds.append(binary[a:b])
            truths.append(
                dm.align_pianoroll(rec.labels, emb_frames)
            )
            groups.append(rec.labels.group_id)
        return metric_f1_track(preds, truths, groups)
    x_test, y_test = data["test"]
    pred = predict(probe, x_test)
    if task.metric == "accuracy":
        return metric_accuracy(pred, y_test)
    lo, hi = norm
    y_norm = (y_test - lo) / (hi - lo) if hi > lo else np.zeros_like(y_test)
    return metric_mse(pred, y_norm)


def _train_task_probe(manifest, task, mode, seed, overrides):
    """Assemble task data, train the appropriate probe, return test metric."""
    splits = _split_sets(manifest, task)
    norm = (0.0, 1.0)
    if task.target == "multipitch":
        data = {s: _frame_xy(manifest, task, splits[s], mode) for s in dm.SPLITS}
        input_dim = data["train"][0].shape[1]
        spec = resolve_probe_spec("mlp_multilabel", input_dim, dm.N_PITCHES,
                                  seed, overrides)
        probe = train_probe(spec, data["train"][0], data["train"][1],
                            data["val"][0], data["val"][1])
        n_test = len(splits["test"])
    else:
        data = {s: _global_xy(manifest, task, splits[s], mode) for s in dm.SPLITS}
        input_dim = data["train"][0].shape[1]
        if task.metric == "accuracy":
            spec = resolve_probe_spec("linear_classifier", input_dim,
                                      _n_classes(manifest, task, splits),
                                      seed, overrides)
            probe = train_probe(spec, data["train"][0],
                                data["train"][1].astype(np.int64),
                                data["val"][0], data["val"][1].astype(np.int64))
        else:
            y_train = data["train"][1].astype(np.float64)
            lo, hi = float(y_train.min()), float(y_train.max())
            norm = (lo, hi)

            def _norm(y):
                return (y - lo) / (hi - lo) if hi > lo else np.zeros_like(y)

            spec = resolve_probe_spec("linear_regressor", input_dim, 1,
                                      seed, overrides)
            probe = train_probe(spec, data["train"][0], _norm(y_train),
                                data["val"][0], _norm(data["val"][1]))
        n_test = data["test"][0].shape[0]
    value = _task_metric_value(task, probe, manifest, splits, data, norm)
    return probe, value, n_test, _spec_obj(spec)


# ---------------------------------------------------------------------------
# axis runners
# ---------------------------------------------------------------------------

def run_informativeness(manifest, task: TaskSpec, seed: int = 0,
                        overrides=None) -> AxisResult:
    """Probe task performance on the task's own stream (test split)."""
    probe, value, n_test, spec_obj = _train_task_probe(
        manifest, task, "own", seed, overrides)
    fp = make_fingerprint(manifest, axis="informativeness", task=task.name,
                          stream=task.stream, target=task.target, seed=seed,
                          probe=spec_obj)
    return AxisResult(
        axis="informativeness", task=task.name, stream=task.stream,
        value=float(value), metric=task.metric, seed=seed,
        config_fingerprint=fp, sample_count=n_test,
        extra={"epochs_run": probe.epochs_run,
               "best_val_loss": float(probe.best_val_loss)},
    )


def run_disentanglement_delta(manifest, task: TaskSpec, seed: int = 0,
                              overrides=None) -> AxisResult:
    """abs(metric on timbre+structure concat - metric on own stream)."""
    if set(manifest.header.streams) != set(dm.STREAMS):
        raise DegenerateError("delta axis needs both streams present")
    _, own_value, n_test, spec_obj = _train_task_probe(
        manifest, task, "own", seed, overrides)
    _, concat_value, _, _ = _train_task_probe(
        manifest, task, "concat", seed, overrides)
    delta = abs(concat_value - own_value)
    fp = make_fingerprint(manifest, axis="disentanglement_delta",
                          task=task.name, stream=task.stream,
                          target=task.target, seed=seed, probe=spec_obj)
    return AxisResult(
        axis="disentanglement_delta", task=task.name, stream=task.stream,
        value=float(delta), metric=task.metric, seed=seed,
        config_fingerprint=fp, sample_count=n_test,
        extra={"own_value": float(own_value),
               "concat_value": float(concat_value)},
    )


def _pair_features(manifest, transform, stream):
    """Pooled pair rows grouped by split: (clean, transformed, param)."""
    pairs = dm.pair_views(manifest, transform, stream)
    out = {split: [] for split in dm.SPLITS}
    for clean, transformed, param in pairs:
        split = manifest.by_id[transformed.item_id].split
        out[split].append((dm.pool_time(clean).data[0].astype(np.float64),
                           dm.pool_time(transformed).data[0].astype(np.float64),
                           float(param)))
    return out


def run_p_equivariance(manifest, stream: str, transform: str, seed: int = 0,
                       overrides=None, single_view: bool = False) -> AxisResult:
    """Test MSE of a linear probe predicting param_norm from embedding pairs.

    Probe input is clean ++ transformed pooled embeddings (the parameter is
    a relation between the two views); single_view=True uses the transformed
    embedding alone.
    """
    by_split = _pair_features(manifest, transform, stream)
    for split in ("train", "val", "test"):
        if not by_split[split]:
            raise DegenerateError(
                f"p_equivariance: no '{transform}' pairs in split '{split}'")

    def _xy(rows):
        if single_view:
            x = np.stack([t for _, t, _ in rows])
        else:
            x = np.stack([np.concatenate([c, t]) for c, t, _ in rows])
        return x, np.array([p for _, _, p in rows])

    x_train, y_train = _xy(by_split["train"])
    x_val, y_val = _xy(by_split["val"])
    x_test, y_test = _xy(by_split["test"])
    all_params = np.concatenate([y_train, y_val, y_test])
    degenerate = bool(all_params.var() < PARAM_VARIANCE_EPS)

    spec = resolve_probe_spec("linear_regressor", x_train.shape[1], 1,
                              seed, overrides)
    probe = train_probe(spec, x_train, y_train, x_val, y_val)
    value = metric_mse(predict(probe, x_test), y_test)
    fp = make_fingerprint(manifest, axis="p_equivariance", transform=transform,
                          stream=stream, seed=seed, probe=_spec_obj(spec),
                          single_view=single_view)
    extra = {"epochs_run": probe.epochs_run}
    if degenerate:
        extra["degenerate_params"] = True
    return AxisResult(
        axis="p_equivariance", task=transform, stream=stream,
        value=float(value), metric="mse", seed=seed, config_fingerprint=fp,
        sample_count=len(y_test), extra=extra,
    )


def run_r_equivariance(manifest, stream: str, transform: str, seed: int = 0,
                       overrides=None) -> AxisResult:
    """Mean test cosine between predicted and actual transformed embeddings.

    The linear map takes the clean pooled embedding with param_norm appended
    as one extra input dimension.
    """
    by_split = _pair_features(manifest, transform, stream)
    for split in ("train", "val", "test"):
        if not by_split[split]:
            raise DegenerateError(
                f"r_equivariance: no '{transform}' pairs in split '{split}'")

    def _xy(rows):
        x = np.stack([np.concatenate([c, [p]]) for c, _, p in rows])
        y = np.stack([t for _, t, _ in rows])
        return x, y

    x_train, y_train = _xy(by_split["train"])
    x_val, y_val = _xy(by_split["val"])
    x_test, y_test = _xy(by_split["test"])

    spec = resolve_probe_spec("linear_map", x_train.shape[1],
                              y_train.shape[1], seed, overrides)
    probe = train_probe(spec, x_train, y_train, x_val, y_val)
    pred = predict(probe, x_test)
    sims, skipped = [], 0
    for i in range(pred.shape[0]):
        try:
            sims.append(metric_cosine(pred[i], y_test[i]))
        except ZeroVectorError:
            skipped += 1
    if not sims:
        raise EmptyError("r_equivariance: every test pair had a zero vector")
    fp = make_fingerprint(manifest, axis="r_equivariance", transform=transform,
                          stream=stream, seed=seed, probe=_spec_obj(spec))
    return AxisResult(
        axis="r_equivariance", task=transform, stream=stream,
        value=float(np.mean(sims)), metric="cosine", seed=seed,
        config_fingerprint=fp, sample_count=len(sims),
        extra={"skipped": skipped, "epochs_run": probe.epochs_run},
    )


def run_invariance(manifest, stream: str, transform: str,
                   frame_wise: bool = False) -> AxisResult:
    """Probe-free mean cosine between clean and transformed embeddings.

    Pooled by default; frame_wise compares time-varying streams frame by
    frame. Exactly deterministic (no seed sensitivity).
    """
    pairs = dm.pair_views(manifest, transform, stream)
    sims, skipped = [], 0
    for clean, transformed, _ in pairs:
        try:
            if frame_wise:
                sims.append(metric_cosine(clean.data, transformed.data))
            else:
                sims.append(metric_cosine(dm.pool_time(clean).data[0],
                                          dm.pool_time(transformed).data[0]))
        except ZeroVectorError:
            skipped += 1
    if not sims:
        raise EmptyError("invariance: every pair had a zero vector")
    fp = make_fingerprint(manifest, axis="invariance", transform=transform,
                          stream=stream, seed=0, frame_wise=frame_wise)
    extra = {"std": float(np.std(sims))}
    if skipped:
        extra["skipped"] = skipped
    return AxisResult(
        axis="invariance", task=transform, stream=stream,
        value=float(np.mean(sims)), metric="cosine", seed=0,
        config_fingerprint=fp, sample_count=len(sims), extra=extra,
    )


# ---------------------------------------------------------------------------
# MIG cross-check
# ---------------------------------------------------------------------------

def _binned(column: np.ndarray, n_bins: int) -> np.ndarray:
    lo, hi = column.min(), column.max()
    if hi <= lo:
        return np.zeros(column.shape, dtype=np.int64)
    edges = np.linspace(lo, hi, n_bins + 1)
    return np.clip(np.searchsorted(edges, column, side="right") - 1,
                   0, n_bins - 1)


def _discrete_mi(a: np.ndarray, b: np.ndarray) -> float:
    """MI of two discrete variables in nats, from joint counts."""
    n = a.shape[0]
    joint = {}
    for pair in zip(a.tolist(), b.tolist()):
        joint[pair] = joint.get(pair, 0) + 1
    pa, pb = {}, {}
    for (i, j), c in joint.items():
        pa[i] = pa.get(i, 0) + c
        pb[j] = pb.get(j, 0) + c
    mi = 0.0
    for (i, j), c in joint.items():
        pij = c / n
        mi += pij * np.log(pij * n * n / (pa[i] * pb[j]))
    return max(mi, 0.0)


def _entropy(y: np.ndarray) -> float:
    _, counts = np.unique(y, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def mig_score(x: np.ndarray, factors: dict, n_bins: int = MIG_BINS):
    """Mutual information gap over binned dimensions.

    Per factor: (top1 MI - top2 MI) / factor entropy, MI taken over the
    dimensions of x after equal-width binning; returns (mean gap, per-factor
    gaps).
    """
    if len(factors) < 2:
        raise DegenerateError("MIG needs at least 2 discrete factors")
    x = np.asarray(x, dtype=np.float64)
    binned = [_binned(x[:, d], n_bins) for d in range(x.shape[1])]
    gaps = {}
    for name, y in factors.items():
        y = np.asarray(y, dtype=np.int64)
        h = _entropy(y)
        if h == 0.0:
            raise DegenerateError(f"factor '{name}' is constant")
        mis = sorted((_discrete_mi(col, y) for col in binned), reverse=True)
        top2 = mis[1] if len(mis) > 1 else 0.0
        gaps[name] = (mis[0] - top2) / h
    return float(np.mean(list(gaps.values()))), gaps


def run_mig(manifest, stream: str, factors: list, n_bins: int = MIG_BINS
            ) -> AxisResult:
    """Binned-MI MIG of one pooled stream against discrete label factors."""
    records = [r for r in manifest.clean_records()
               if all(r.labels.get(f) is not None for f in factors)]
    if not records:
        raise DegenerateError("no records carry all requested factors")
    x = np.stack([_pooled_row(manifest, r.item_id, stream) for r in records])
    ys = {f: np.array([r.labels.get(f) for r in records]) for f in factors}
    value, gaps = mig_score(x.astype(np.float64), ys, n_bins)
    fp = make_fingerprint(manifest, axis="mig", stream=stream,
                          factors=sorted(factors), bins=n_bins, seed=0)
    return AxisResult(
        axis="mig", task="+".join(sorted(factors)), stream=stream,
        value=value, metric="mig", seed=0, config_fingerprint=fp,
        sample_count=len(records),
        extra={f"gap_{name}": float(g) for name, g in gaps.items()},
    )
