"""Encoder registry mapping model names to embedding extractors.

The engine's internals for the published models are out of scope here, so
the registry ships a deterministic reference encoder per model name: log
band energies per frame, linearly projected to the model's embedding dims
by checkpoint-stored matrices. Swapping in an official implementation means
registering a callable with the same encode contract; everything downstream
(transforms, manifests, validation) stays unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .models import ModelConfig, model_config

N_BANDS = 32
_F_MIN = 50.0


def band_energies(samples: np.ndarray, sr: int, n_frames: int) -> np.ndarray:
    """Log-energy in geometrically spaced bands, one row per frame."""
    chunk = max(len(samples) // n_frames, 1)
    edges = np.geomspace(_F_MIN, sr / 2.0, N_BANDS + 1)
    feats = np.empty((n_frames, N_BANDS))
    for t in range(n_frames):
        frame = samples[t * chunk:(t + 1) * chunk]
        if frame.size == 0:
            frame = np.zeros(chunk)
        spectrum = np.abs(np.fft.rfft(frame))
        freqs = np.fft.rfftfreq(len(frame), d=1.0 / sr)
        for b in range(N_BANDS):
            mask = (freqs >= edges[b]) & (freqs < edges[b + 1])
            feats[t, b] = np.log1p(spectrum[mask].sum() if mask.any() else 0.0)
    return feats


class SpectralProjectionEncoder:
    """Reference encoder: checkpoint-defined linear maps over band energies."""

    def __init__(self, model: str, checkpoint: dict, config: ModelConfig):
        self.model = model
        self.config = config
        self.w_timbre = checkpoint["w_timbre"]
        self.b_timbre = checkpoint["b_timbre"]
        self.w_structure = checkpoint["w_structure"]
        self.b_structure = checkpoint["b_structure"]

    def encode(self, samples: np.ndarray, sr: int) -> dict:
        feats = band_energies(samples, sr, self.config.temporal_res)
        structure = feats @ self.w_structure + self.b_structure
        timbre = feats.mean(axis=0) @ self.w_timbre + self.b_timbre
        return {
            "timbre": timbre[None, :].astype(np.float32),
            "structure": structure.astype(np.float32),
        }


def load_encoder(model: str, checkpoint_path) -> SpectralProjectionEncoder:
    """Load a checkpoint and validate its dims against the model table."""
    config = model_config(model)
    path = Path(checkpoint_path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            checkpoint = {key: data[key] for key in data.files}
    except Exception as e:
        raise CheckpointError(f"{path.name}: cannot read checkpoint ({e})") from e

    required = {"model", "w_timbre", "b_timbre", "w_structure", "b_structure"}
    missing = required - set(checkpoint)
    if missing:
        raise CheckpointError(f"{path.name}: missing arrays {sorted(missing)}")
    ckpt_model = str(checkpoint["model"])
    if ckpt_model != model:
        raise CheckpointError(
            f"{path.name}: checkpoint is for '{ckpt_model}', requested '{model}'")

    shapes = {
        "w_timbre": (N_BANDS, config.timbre_dim),
        "b_timbre": (config.timbre_dim,),
        "w_structure": (N_BANDS, config.structure_dim),
        "b_structure": (config.structure_dim,),
    }
    for name, want in shapes.items():
        got = checkpoint[name].shape
        if got != want:
            raise CheckpointError(
                f"{path.name}: {name} shape {got} != {want} for '{model}' "
                f"(dims must match the published configuration)")
    return SpectralProjectionEncoder(model, checkpoint, config)


def make_reference_checkpoint(model: str, path, seed: int = 0) -> Path:
    """Write a working checkpoint with seeded projection weights."""
    config = model_config(model)
    rng = np.random.default_rng(seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        model=np.str_(model),
        w_timbre=rng.normal(0, 1 / np.sqrt(N_BANDS),
                            (N_BANDS, config.timbre_dim)),
        b_timbre=rng.normal(0, 0.1, config.timbre_dim),
        w_structure=rng.normal(0, 1 / np.sqrt(N_BANDS),
                               (N_BANDS, config.structure_dim)),
        b_structure=rng.normal(0, 0.1, config.structure_dim),
    )
    return path
