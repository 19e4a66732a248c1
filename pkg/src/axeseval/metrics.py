"""Task metrics: accuracy, MSE, cosine similarity, track-level multipitch F1."""

from __future__ import annotations

import numpy as np

from .errors import LengthError, ZeroVectorError

ZERO_NORM_EPS = 1e-12


def metric_accuracy(pred, truth) -> float:
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.shape != truth.shape or pred.size == 0:
        raise LengthError(f"accuracy: {pred.shape} vs {truth.shape}")
    return float(np.mean(pred == truth))


def metric_mse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape or pred.size == 0:
        raise LengthError(f"mse: {pred.shape} vs {truth.shape}")
    return float(np.mean((pred - truth) ** 2))


def _cosine_1d(a: np.ndarray, b: np.ndarray) -> float:
    aa = float(a @ a)
    bb = float(b @ b)
    if aa < ZERO_NORM_EPS**2 or bb < ZERO_NORM_EPS**2:
        raise ZeroVectorError("cosine undefined for (near-)zero vector")
    # sqrt(aa*bb) keeps cos(a, a) == 1.0 exactly for identical inputs
    return float(a @ b) / float(np.sqrt(aa * bb))


def metric_cosine(a, b) -> float:
    """Cosine similarity of two vectors, or the frame-wise mean for matrices.

    Time-varying inputs are truncated to the shorter length and compared
    frame by frame.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1 and b.ndim == 1:
        if a.shape != b.shape:
            raise LengthError(f"cosine: dims {a.shape} vs {b.shape}")
        return _cosine_1d(a, b)
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if a.shape[1] != b.shape[1]:
        raise LengthError(f"cosine: dims {a.shape[1]} vs {b.shape[1]}")
    frames = min(a.shape[0], b.shape[0])
    sims = [_cosine_1d(a[t], b[t]) for t in range(frames)]
    return float(np.mean(sims))


def metric_f1_track(pred_rolls, truth_rolls, group_ids) -> float:
    """Unweighted mean of per-track F1 over pooled frames.

    Each item contributes one binary roll; items sharing a group_id form a
    track whose frames are pooled before computing precision and recall.
    F1 of a track is 0 when precision + recall is 0.
    """
    if not (len(pred_rolls) == len(truth_rolls) == len(group_ids)):
        raise LengthError(
            f"f1_track: {len(pred_rolls)} preds, {len(truth_rolls)} truths, "
            f"{len(group_ids)} group ids"
        )
    if len(pred_rolls) == 0:
        raise LengthError("f1_track: no items")
    counts = {}
    for pred, truth, gid in zip(pred_rolls, truth_rolls, group_ids):
        pred = np.asarray(pred)
        truth = np.asarray(truth)
        if pred.shape != truth.shape:
            raise LengthError(f"f1_track: roll shapes {pred.shape} vs {truth.shape}")
        tp = int(np.sum((pred == 1) & (truth == 1)))
        fp = int(np.sum((pred == 1) & (truth == 0)))
        fn = int(np.sum((pred == 0) & (truth == 1)))
        acc = counts.setdefault(gid, [0, 0, 0])
        acc[0] += tp
        acc[1] += fp
        acc[2] += fn
    f1s = []
    for tp, fp, fn in counts.values():
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall == 0.0:
            f1s.append(0.0)
        else:
            f1s.append(2.0 * precision * recall / (precision + recall))
    return float(np.mean(f1s))
