"""Shared fixtures: hand-built datasets and reusable synthetic worlds."""

import json

import numpy as np
import pytest

from axeseval import datamodel as dm


def build_dataset(root, streams, records, param_norm=None, labels=None):
    """Write a dataset directory from plain dicts and return its manifest path.

    streams: {"timbre": {"dim": d, "frames": t}, ...}
    records: list of dicts with keys item_id, split, tensors (stream ->
             ndarray), labels (dict), view (dict, optional), pianoroll
             (ndarray, optional).
    """
    root.mkdir(parents=True, exist_ok=True)
    header = {
        "labels": labels or {},
        "param_norm": param_norm or {},
        "streams": streams,
        "version": 1,
    }
    lines = [dm.canonical_json(header)]
    for rec in records:
        tensors = {}
        for stream, arr in rec["tensors"].items():
            rel = f"tensors/{rec['item_id']}.{stream}.npy"
            dm.write_embedding(root / rel, np.asarray(arr, dtype=np.float32))
            tensors[stream] = rel
        label_obj = dict(rec.get("labels", {}))
        label_obj.setdefault("group_id", rec["item_id"])
        if "pianoroll" in rec:
            rel = f"rolls/{rec['item_id']}.npy"
            dm.write_pianoroll(root / rel, rec["pianoroll"])
            label_obj["pianoroll"] = rel
        view = {"base_item_id": rec["item_id"], "transform": "none",
                "param_raw": 0.0, "param_norm": 0.0}
        view.update(rec.get("view", {}))
        lines.append(dm.canonical_json({
            "item_id": rec["item_id"],
            "labels": label_obj,
            "split": rec["split"],
            "tensors": tensors,
            "view": view,
        }))
    path = root / "manifest.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def three_item_records(dim_t=3, dim_s=4):
    rng = np.random.default_rng(0)
    recs = []
    for i, split in enumerate(["train", "val", "test"]):
        recs.append({
            "item_id": f"item{i}",
            "split": split,
            "tensors": {
                "timbre": rng.normal(size=(1, dim_t)),
                "structure": rng.normal(size=(1, dim_s)),
            },
            "labels": {"instrument_id": i % 2, "group_id": f"trk{i}"},
        })
    return recs


@pytest.fixture
def tiny_dataset(tmp_path):
    streams = {"timbre": {"dim": 3, "frames": 1},
               "structure": {"dim": 4, "frames": 1}}
    path = build_dataset(tmp_path / "tiny", streams, three_item_records())
    return dm.load_manifest(path)
