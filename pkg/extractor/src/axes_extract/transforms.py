"""Audio-domain transforms: time stretch (phase vocoder) and pitch shift
(resample + stretch back). Both are exact identities at their neutral
parameter, so zero-magnitude views reproduce the clean embeddings bit for
bit."""

from __future__ import annotations

import numpy as np

WIN = 1024
HOP = 256


def _framed(x: np.ndarray) -> np.ndarray:
    if len(x) < WIN:
        x = np.pad(x, (0, WIN - len(x)))
    n = 1 + (len(x) - WIN) // HOP
    idx = np.arange(WIN)[None, :] + HOP * np.arange(n)[:, None]
    return x[idx]


def _stft(x: np.ndarray) -> np.ndarray:
    return np.fft.rfft(_framed(x) * np.hanning(WIN), axis=1)


def _istft(spec: np.ndarray) -> np.ndarray:
    window = np.hanning(WIN)
    frames = np.fft.irfft(spec, n=WIN, axis=1) * window
    n = spec.shape[0]
    out = np.zeros(WIN + HOP * (n - 1))
    norm = np.zeros_like(out)
    for k in range(n):
        out[k * HOP:k * HOP + WIN] += frames[k]
        norm[k * HOP:k * HOP + WIN] += window**2
    return out / np.maximum(norm, 1e-8)


def time_stretch(x: np.ndarray, ratio: float) -> np.ndarray:
    """Change duration by 1/ratio at constant pitch (ratio > 1 = faster)."""
    if ratio <= 0:
        raise ValueError("stretch ratio must be positive")
    if ratio == 1.0:
        return x.copy()
    spec = _stft(np.asarray(x, dtype=np.float64))
    n_in = spec.shape[0]
    if n_in < 2:
        return x.copy()
    positions = np.arange(0, n_in - 1, ratio)
    omega = 2.0 * np.pi * HOP * np.arange(spec.shape[1]) / WIN
    mags = np.abs(spec)
    phases = np.angle(spec)
    out = np.empty((len(positions), spec.shape[1]), dtype=complex)
    acc = phases[0].copy()
    for i, pos in enumerate(positions):
        j = int(pos)
        frac = pos - j
        mag = (1.0 - frac) * mags[j] + frac * mags[j + 1]
        dphi = phases[j + 1] - phases[j] - omega
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        out[i] = mag * np.exp(1j * acc)
        acc = acc + omega + dphi
    return _istft(out)


def pitch_shift(x: np.ndarray, semitones: float) -> np.ndarray:
    """Shift pitch by a semitone amount at (approximately) constant duration."""
    if semitones == 0:
        return np.asarray(x, dtype=np.float64).copy()
    x = np.asarray(x, dtype=np.float64)
    factor = 2.0 ** (semitones / 12.0)
    n_new = max(2, int(round(len(x) / factor)))
    resampled = np.interp(np.linspace(0.0, len(x) - 1.0, n_new),
                          np.arange(len(x)), x)
    return time_stretch(resampled, 1.0 / factor)
