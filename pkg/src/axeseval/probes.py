"""Shallow probes trained on frozen embeddings.

Four fixed architectures: softmax linear classifier, linear regressor,
linear map (vector-valued regression), and a 2-layer MLP with 512 hidden
units and sigmoid outputs for multilabel pitch rolls. Inputs are
standardized with train-split statistics; training uses Adam with
mini-batches and early stopping on validation loss. All internal math is
float64 so the finite-difference gradient check is meaningful; embedding
files on disk stay float32.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .datamodel import canonical_json
from .errors import (
    DegenerateError,
    NonFiniteError,
    ShapeError,
    SingularError,
)
from .numerics import AdamState, Rng, adam_step, matmul

PROBE_KINDS = ("linear_classifier", "linear_regressor", "linear_map",
               "mlp_multilabel")

THRESHOLD_GRID = tuple(i / 20.0 for i in range(1, 20))  # 0.05 .. 0.95

_MAGIC = b"AXPROBE1"


@dataclass(frozen=True)
class ProbeSpec:
    kind: str
    input_dim: int
    output_dim: int
    hidden_dim: int | None = None
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    improvement_eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise ShapeError(f"unknown probe kind '{self.kind}'")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ShapeError("probe dims must be positive")
        if self.patience >= self.max_epochs:
            raise ShapeError("patience must be < max_epochs")
        if self.kind == "mlp_multilabel":
            if self.hidden_dim is None:
                object.__setattr__(self, "hidden_dim", 512)
            if self.hidden_dim < 1:
                raise ShapeError("hidden_dim must be positive")
        elif self.hidden_dim is not None:
            raise ShapeError("hidden_dim only applies to mlp_multilabel")


@dataclass
class TrainedProbe:
    spec: ProbeSpec
    weights: list  # [W, b] or [W1, b1, W2, b2], float64
    mean: np.ndarray
    std: np.ndarray
    best_val_loss: float
    epochs_run: int
    val_losses: list = field(default_factory=list)
    threshold: float | None = None


def _init_params(spec: ProbeSpec, y_train=None) -> list:
    d, k = spec.input_dim, spec.output_dim
    if spec.kind == "mlp_multilabel":
        h = spec.hidden_dim
        rng = Rng(spec.seed).child("init")
        w1 = rng.normal((d, h)) * np.sqrt(2.0 / d)
        w2 = rng.normal((h, k)) * np.sqrt(2.0 / h)
        return [w1, np.zeros(h), w2, np.zeros(k)]
    # convex objectives: zero weights, bias at the best constant predictor
    # (target mean / class-prior logits) so Adam only learns deviations
    bias = np.zeros(k)
    if y_train is not None:
        if spec.kind == "linear_classifier":
            counts = np.bincount(y_train, minlength=k).astype(np.float64)
            bias = np.log((counts + 1.0) / (counts.sum() + k))
        else:
            bias = y_train.mean(axis=0)
    return [np.zeros((d, k)), bias.astype(np.float64)]


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grads(spec: ProbeSpec, params, x, y):
    """Mean loss and parameter gradients on one batch (float64)."""
    n = x.shape[0]
    if spec.kind == "linear_classifier":
        w, b = params
        probs = _softmax(matmul(x, w) + b)
        eps = 1e-12
        loss = -np.mean(np.log(probs[np.arange(n), y] + eps))
        dlogits = probs
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        return loss, [matmul(x.T, dlogits), dlogits.sum(axis=0)]
    if spec.kind in ("linear_regressor", "linear_map"):
        w, b = params
        pred = matmul(x, w) + b
        resid = pred - y
        loss = np.mean(resid**2)
        dpred = 2.0 * resid / resid.size
        return loss, [matmul(x.T, dpred), dpred.sum(axis=0)]
    # mlp_multilabel: BCE with logits, mean over all cells
    w1, b1, w2, b2 = params
    pre = matmul(x, w1) + b1
    hidden = np.maximum(pre, 0.0)
    logits = matmul(hidden, w2) + b2
    loss = np.mean(
        np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
    )
    dlogits = (_sigmoid(logits) - y) / logits.size
    dhidden = matmul(dlogits, w2.T) * (pre > 0.0)
    return loss, [
        matmul(x.T, dhidden),
        dhidden.sum(axis=0),
        matmul(hidden.T, dlogits),
        dlogits.sum(axis=0),
    ]


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(spec: ProbeSpec, params, x):
    if spec.kind == "mlp_multilabel":
        w1, b1, w2, b2 = params
        hidden = np.maximum(matmul(x, w1) + b1, 0.0)
        return _sigmoid(matmul(hidden, w2) + b2)
    w, b = params
    return matmul(x, w) + b


def _check_xy(spec: ProbeSpec, x, y, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"{what}: X shape {x.shape} incompatible with "
                         f"input_dim {spec.input_dim}")
    if x.shape[0] == 0:
        raise DegenerateError(f"{what}: empty split")
    if not np.isfinite(x).all():
        raise NonFiniteError(f"{what}: non-finite values in inputs")
    if spec.kind == "linear_classifier":
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if y.shape[0] != x.shape[0]:
            raise ShapeError(f"{what}: {x.shape[0]} rows vs {y.shape[0]} labels")
        if y.min() < 0 or y.max() >= spec.output_dim:
            raise ShapeError(f"{what}: class ids outside 0..{spec.output_dim - 1}")
        return x, y
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != (x.shape[0], spec.output_dim):
        raise ShapeError(f"{what}: target shape {y.shape} != "
                         f"({x.shape[0]}, {spec.output_dim})")
    return x, y


def train_probe(spec: ProbeSpec, x_train, y_train, x_val, y_val) -> TrainedProbe:
    """Train with Adam + early stopping; returns the best-val-epoch weights.

    Deterministic given (spec, data): initialization and batch order are
    pure functions of spec.seed.
    """
    x_train, y_train = _check_xy(spec, x_train, y_train, "train")
    x_val, y_val = _check_xy(spec, x_val, y_val, "val")
    if spec.kind == "linear_classifier" and np.unique(y_train).size < 2:
        raise DegenerateError("fewer than 2 classes present in training labels")

    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    xs_train = (x_train - mean) / std
    xs_val = (x_val - mean) / std

    params = _init_params(spec, y_train)
    adam = AdamState.for_params(params, spec.learning_rate)
    batch_rng = Rng(spec.seed).child("batches")

    n = xs_train.shape[0]
    best_loss = np.inf
    best_params = [p.copy() for p in params]
    bad_epochs = 0
    val_losses = []
    epochs_run = 0

    for epoch in range(spec.max_epochs):
        perm = batch_rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = perm[start:start + spec.batch_size]
            loss, grads = _loss_and_grads(spec, params, xs_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise NonFiniteError(f"training loss diverged at epoch {epoch + 1}")
            adam_step(adam, params, grads)
        val_loss, _ = _loss_and_grads(spec, params, xs_val, y_val)
        if not np.isfinite(val_loss):
            raise NonFiniteError(f"validation loss diverged at epoch {epoch + 1}")
        val_losses.append(float(val_loss))
        epochs_run = epoch + 1
        improved_enough = val_loss < best_loss - spec.improvement_eps
        if val_loss < best_loss:
            best_loss = float(val_loss)
            best_params = [p.copy() for p in params]
        if improved_enough:
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= spec.patience:
                break

    probe = TrainedProbe(
        spec=spec,
        weights=best_params,
        mean=mean,
        std=std,
        best_val_loss=best_loss,
        epochs_run=epochs_run,
        val_losses=val_losses,
    )
    if spec.kind == "mlp_multilabel":
        probe.threshold = tune_threshold(probe, x_val, y_val)
    return probe


def predict(probe: TrainedProbe, x, prestandardized=False):
    """Apply a trained probe.

    Classifier returns argmax class ids; regressor/linear_map return real
    outputs; mlp_multilabel returns (sigmoid scores, thresholded binary).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != probe.spec.input_dim:
        raise ShapeError(f"predict: X shape {x.shape} incompatible with "
                         f"input_dim {probe.spec.input_dim}")
    xs = x if prestandardized else (x - probe.mean) / probe.std
    out = _forward(probe.spec, probe.weights, xs)
    kind = probe.spec.kind
    if kind == "linear_classifier":
        return np.argmax(out, axis=1)
    if kind == "linear_regressor":
        return out[:, 0]
    if kind == "linear_map":
        return out
    threshold = 0.5 if probe.threshold is None else probe.threshold
    return out, (out >= threshold).astype(np.uint8)


def _frame_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    tp = float(np.sum((pred == 1) & (truth == 1)))
    fp = float(np.sum((pred == 1) & (truth == 0)))
    fn = float(np.sum((pred == 0) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def tune_threshold(probe: TrainedProbe, x_val, rolls_val) -> float:
    """Grid search {0.05..0.95} maximizing frame-level F1 on validation.

    Ties break toward 0.5 (smallest |t - 0.5|, then smaller t).
    """
    if probe.spec.kind != "mlp_multilabel":
        raise ValueError("threshold tuning only applies to mlp_multilabel probes")
    rolls_val = np.asarray(rolls_val)
    if rolls_val.sum() == 0:
        raise DegenerateError("validation rolls contain no positive labels")
    scores, _ = predict(probe, x_val)
    best = None
    for t in THRESHOLD_GRID:
        f1 = _frame_f1((scores >= t).astype(np.uint8), rolls_val)
        key = (-f1, abs(t - 0.5), t)
        if best is None or key < best[0]:
            best = (key, t)
    return best[1]


def closed_form_ridge(x, y, lam: float) -> np.ndarray:
    """Solve (X'X + lam*I) w = X'y with a direct dense solver.

    Oracle for the gradient-trained linear probes; no intercept (append a
    ones column when one is wanted).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if lam < 0:
        raise ShapeError("ridge lambda must be >= 0")
    gram = matmul(x.T, x) + lam * np.eye(x.shape[1])
    rhs = matmul(x.T, y)
    try:
        w = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularError(f"normal equations singular with lambda={lam}") from e
    if not np.isfinite(w).all():
        raise SingularError(f"solver produced non-finite weights (lambda={lam})")
    return w if y.shape[1] > 1 else w[:, 0]


def mlp_gradient_check(spec: ProbeSpec, x, y, h: float = 1e-4) -> float:
    """Max relative error of analytic MLP gradients vs central differences.

    Meant for small instances (<= 8 samples, <= 16 dims, hidden <= 8).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    params = _init_params(spec)
    _, analytic = _loss_and_grads(spec, params, x, y)
    max_err = 0.0
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp, _ = _loss_and_grads(spec, params, x, y)
            flat[j] = orig - h
            lm, _ = _loss_and_grads(spec, params, x, y)
            flat[j] = orig
            fd = (lp - lm) / (2.0 * h)
            a = analytic[pi].reshape(-1)[j]
            err = abs(a - fd) / max(abs(a) + abs(fd), 1e-8)
            max_err = max(max_err, err)
    return max_err


def save_probe(probe: TrainedProbe, path) -> Path:
    """Single-file container: header JSON + length-prefixed NPY blocks."""
    path = Path(path)
    blocks = [("mean", probe.mean), ("std", probe.std)]
    blocks += [(f"w{i}", w) for i, w in enumerate(probe.weights)]
    header = {
        "best_val_loss": probe.best_val_loss,
        "blocks": [name for name, _ in blocks],
        "epochs_run": probe.epochs_run,
        "spec": asdict(probe.spec),
        "threshold": probe.threshold,
        "val_losses": probe.val_losses,
    }
    header_bytes = canonical_json(header).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for _, arr in blocks:
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arr))
            payload = buf.getvalue()
            f.write(struct.pack("<Q", len(payload)))
            f.write(payload)
    return path


def load_probe(path) -> TrainedProbe:
    with open(path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise ShapeError(f"{path}: not a probe container")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode())
        arrays = {}
        for name in header["blocks"]:
            (block_len,) = struct.unpack("<Q", f.read(8))
            arrays[name] = np.load(io.BytesIO(f.read(block_len)),
                                   allow_pickle=False)
    spec = ProbeSpec(**header["spec"])
    n_weights = 4 if spec.kind == "mlp_multilabel" else 2
    return TrainedProbe(
        spec=spec,
        weights=[arrays[f"w{i}"] for i in range(n_weights)],
        mean=arrays["mean"],
        std=arrays["std"],
        best_val_loss=header["best_val_loss"],
        epochs_run=header["epochs_run"],
        val_losses=header["val_losses"],
        threshold=header["threshold"],
    )
