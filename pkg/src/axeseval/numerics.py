"""Dense 2-D tensor helpers, deterministic RNG, and the Adam optimizer.

Storage for on-disk embeddings is float32; every reduction here accumulates
in float64. Probe training passes float64 arrays through the same functions,
which keeps one code path for the gradient checks.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Rng:
    """Deterministic random stream (PCG64, seed-derived, platform-stable).

    All randomized operations in the engine take an explicit Rng; there is
    no hidden global state.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "Rng":
        """Independent stream derived from (seed, label); stable across runs."""
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        return Rng(int.from_bytes(digest[:8], "little"))

    def normal(self, shape, scale=1.0):
        return self._gen.normal(0.0, scale, size=shape)

    def uniform(self, lo, hi, shape=None):
        return self._gen.uniform(lo, hi, size=shape)

    def integers(self, lo, hi, shape=None):
        return self._gen.integers(lo, hi, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def as_tensor2(x, name="tensor") -> np.ndarray:
    """Validate a dense 2-D real matrix: finite values, rows*cols == size."""
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected 2-D array, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ShapeError(f"{name}: contains non-finite values")
    return np.ascontiguousarray(arr)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with float64 accumulation.

    Result is stored in the wider of the two input dtypes (float32 inputs
    come back as float32 storage).
    """
    a = as_tensor2(a, "a")
    b = as_tensor2(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ ({a.shape} x {b.shape})")
    out = a.astype(np.float64, copy=False) @ b.astype(np.float64, copy=False)
    storage = np.result_type(a.dtype, b.dtype)
    return out.astype(storage, copy=False)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction (overflow-safe)."""
    x = as_tensor2(x, "x")
    shifted = x.astype(np.float64, copy=False)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out.astype(np.result_type(x.dtype, np.float32), copy=False)


@dataclass
class AdamState:
    """Adam moment buffers for a fixed list of parameter shapes."""

    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate):
        state = cls(learning_rate=float(learning_rate))
        state.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        state.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        return state


def adam_step(state: AdamState, params: list, grads: list) -> list:
    """One Adam update with bias correction; mutates state, returns params.

    Parameters are updated in place (float64 buffers owned by the caller).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("adam_step: parameter/gradient count mismatch")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"adam_step: param {i} shape {p.shape} != grad {g.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / (1.0 - b1**t)
        v_hat = state.v[i] / (1.0 - b2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
