"""Writer for the evaluation engine's dataset contract.

Standalone on purpose: the adapter talks to the engine only through this
file format (JSONL manifest + NPY tensors, canonical JSON = sorted keys,
no insignificant whitespace) and the `axes-eval validate` CLI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_tensor(path: Path, data: np.ndarray):
    """NPY v1.0, little-endian float32, C order, shape (frames, dim)."""
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.float32))
    if arr.ndim != 2:
        raise ValueError(f"tensor must be 2-D, got {arr.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, arr)


@dataclass(frozen=True)
class ParamAffine:
    """param_norm = (param_raw - offset) / scale; scale > 0."""

    scale: float
    offset: float

    @classmethod
    def covering(cls, values) -> "ParamAffine":
        """Affine mapping the value set into [-1, 1], centered on its range."""
        lo, hi = min(values), max(values)
        center = (lo + hi) / 2.0
        half = (hi - lo) / 2.0
        return cls(scale=half if half > 0 else 1.0, offset=center)

    def normalize(self, raw: float) -> float:
        # covering() puts every configured raw inside the range; the clamp
        # only strips float dust like (1.25-1.025)/0.225 = 1.0000000000000004
        return min(1.0, max(-1.0, (raw - self.offset) / self.scale))


@dataclass
class ManifestBuilder:
    timbre_dim: int
    structure_dim: int
    temporal_res: int
    param_affines: dict = field(default_factory=dict)  # transform -> ParamAffine
    records: list = field(default_factory=list)

    def header_obj(self) -> dict:
        return {
            "labels": {},
            "param_norm": {
                name: {"offset": affine.offset, "scale": affine.scale}
                for name, affine in self.param_affines.items()
            },
            "streams": {
                "structure": {"dim": self.structure_dim,
                              "frames": self.temporal_res},
                "timbre": {"dim": self.timbre_dim, "frames": 1},
            },
            "version": 1,
        }

    def add(self, item_id: str, split: str, group_id: str, tensors: dict,
            transform: str = "none", base_item_id: str | None = None,
            param_raw: float = 0.0):
        if transform == "none":
            view = {"base_item_id": item_id, "transform": "none",
                    "param_raw": 0.0, "param_norm": 0.0}
        else:
            affine = self.param_affines[transform]
            view = {"base_item_id": base_item_id, "transform": transform,
                    "param_raw": float(param_raw),
                    "param_norm": affine.normalize(float(param_raw))}
        self.records.append({
            "item_id": item_id,
            "labels": {"group_id": group_id},
            "split": split,
            "tensors": dict(tensors),
            "view": view,
        })

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = [canonical_json(self.header_obj())]
        lines.extend(canonical_json(rec)
                     for rec in sorted(self.records,
                                       key=lambda r: r["item_id"]))
        path = out_dir / "manifest.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
