"""Audio loading and segmentation. WAV is decoded natively via scipy;
FLAC needs the optional soundfile package and otherwise fails per file."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import CodecError

AUDIO_SUFFIXES = (".wav", ".flac")


def read_audio(path) -> tuple[np.ndarray, int]:
    """Return (mono float64 samples in [-1, 1], sample rate)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".wav":
        try:
            sr, data = wavfile.read(path)
        except Exception as e:
            raise CodecError(f"{path.name}: {e}") from e
    elif suffix == ".flac":
        try:
            import soundfile
        except ImportError:
            raise CodecError(
                f"{path.name}: FLAC decoding needs the 'soundfile' package"
            ) from None
        data, sr = soundfile.read(path)
    else:
        raise CodecError(f"{path.name}: unsupported suffix '{suffix}'")

    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    data = data.astype(np.float64)
    if data.size == 0:
        raise CodecError(f"{path.name}: empty audio")
    return data, int(sr)


def segment(samples: np.ndarray, sr: int, seconds: float) -> list[np.ndarray]:
    """Consecutive non-overlapping segments; a trailing partial is dropped."""
    length = int(round(seconds * sr))
    if length < 1:
        raise CodecError("segment length must cover at least one sample")
    return [samples[i:i + length]
            for i in range(0, len(samples) - length + 1, length)]


def fit_length(samples: np.ndarray, length: int) -> np.ndarray:
    """Trim or zero-pad to an exact sample count."""
    if len(samples) >= length:
        return samples[:length]
    out = np.zeros(length, dtype=samples.dtype)
    out[:len(samples)] = samples
    return out
