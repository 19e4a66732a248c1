"""Dataset contract: JSON Lines manifest plus NPY tensor files.

A dataset directory holds one ``manifest.jsonl`` (first line: header object;
one record object per following line; canonical form = lexicographically
sorted keys, no insignificant whitespace) and the tensor files it references.
Embeddings are little-endian float32 NPY matrices of shape (frames, dim);
pianorolls are uint8 NPY matrices of shape (frames, 128). Tensor paths are
relative to the manifest's directory.

Everything is immutable after load; concurrent readers are safe.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyError,
    MismatchError,
    MissingLabelError,
    ParseError,
    ShapeError,
    ValidationError,
)

STREAMS = ("timbre", "structure")
TRANSFORMS = ("none", "pitch_shift", "time_stretch", "instrument_change")
SPLITS = ("train", "val", "test")

EMBEDDING_DTYPE = np.dtype("<f4")
PIANOROLL_DTYPE = np.dtype("u1")
N_PITCHES = 128


def canonical_json(obj) -> str:
    """Canonical serialization: sorted keys, no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class EmbeddingRecord:
    """One item's embedding for one stream; (1, D) encodes a global vector."""

    item_id: str
    stream: str
    data: np.ndarray  # (T, D) float32
    frame_rate: int

    def validate(self):
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValidationError(
                f"embedding must be a (T>=1, D>=1) matrix, got {self.data.shape}",
                item_id=self.item_id,
            )
        if not np.isfinite(self.data).all():
            raise ValidationError("embedding contains NaN/Inf", item_id=self.item_id)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ViewMeta:
    """Provenance of a record: which transform produced it from which base."""

    base_item_id: str
    transform: str = "none"
    param_raw: float = 0.0
    param_norm: float = 0.0


@dataclass(frozen=True)
class LabelSet:
    """Optional per-item targets plus the track identity used for grouping."""

    group_id: str
    instrument_id: int | None = None
    pitch_class: int | None = None
    chord_type: int | None = None
    tempo_bpm: float | None = None
    pianoroll: np.ndarray | None = None  # (T_lab, 128) uint8

    def get(self, name: str):
        return getattr(self, name)


@dataclass(frozen=True)
class StreamInfo:
    dim: int
    frames: int


@dataclass(frozen=True)
class ParamScaling:
    """param_norm = (param_raw - offset) / scale, with scale > 0."""

    scale: float
    offset: float

    def normalize(self, raw: float) -> float:
        return (raw - self.offset) / self.scale

    def denormalize(self, norm: float) -> float:
        return norm * self.scale + self.offset


@dataclass(frozen=True)
class ManifestHeader:
    streams: dict[str, StreamInfo]
    param_norm: dict[str, ParamScaling] = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "labels": dict(self.labels),
            "param_norm": {
                t: {"offset": s.offset, "scale": s.scale}
                for t, s in self.param_norm.items()
            },
            "streams": {
                name: {"dim": info.dim, "frames": info.frames}
                for name, info in self.streams.items()
            },
            "version": 1,
        }


@dataclass(frozen=True)
class ManifestRecord:
    item_id: str
    split: str
    tensor_paths: dict[str, str]
    labels: LabelSet
    view: ViewMeta
    pianoroll_path: str | None = None

    def to_obj(self) -> dict:
        labels = {"group_id": self.labels.group_id}
        for name in ("instrument_id", "pitch_class", "chord_type", "tempo_bpm"):
            value = getattr(self.labels, name)
            if value is not None:
                labels[name] = value
        if self.pianoroll_path is not None:
            labels["pianoroll"] = self.pianoroll_path
        return {
            "item_id": self.item_id,
            "labels": labels,
            "split": self.split,
            "tensors": dict(self.tensor_paths),
            "view": {
                "base_item_id": self.view.base_item_id,
                "param_norm": self.view.param_norm,
                "param_raw": self.view.param_raw,
                "transform": self.view.transform,
            },
        }


class DatasetManifest:
    """Validated, fully loaded dataset: header, records, and their tensors."""

    def __init__(self, header: ManifestHeader, records: list[ManifestRecord],
                 embeddings: dict[tuple[str, str], np.ndarray], root: Path):
        self.header = header
        self.records = records
        self.root = Path(root)
        self._embeddings = embeddings
        self.by_id = {r.item_id: r for r in records}
        self.header_hash = hashlib.sha256(
            canonical_json(header.to_obj()).encode()
        ).hexdigest()
        # content digest over records and tensor values: result caches keyed
        # by it stay sound even if a dataset is regenerated in place
        digest = hashlib.sha256(canonical_json(header.to_obj()).encode())
        for rec in records:
            digest.update(canonical_json(rec.to_obj()).encode())
            for stream in sorted(rec.tensor_paths):
                digest.update(embeddings[(rec.item_id, stream)].tobytes())
            if rec.labels.pianoroll is not None:
                digest.update(rec.labels.pianoroll.tobytes())
        self.dataset_hash = digest.hexdigest()

    @property
    def streams(self) -> list[str]:
        return sorted(self.header.streams)

    def embedding(self, item_id: str, stream: str) -> EmbeddingRecord:
        data = self._embeddings[(item_id, stream)]
        return EmbeddingRecord(
            item_id=item_id,
            stream=stream,
            data=data,
            frame_rate=self.header.streams[stream].frames,
        )

    def clean_records(self) -> list[ManifestRecord]:
        return [r for r in self.records if r.view.transform == "none"]

    def split_records(self, split: str, clean_only=True) -> list[ManifestRecord]:
        pool = self.clean_records() if clean_only else self.records
        return [r for r in pool if r.split == split]


def write_embedding(path: Path, data: np.ndarray):
    """Write an embedding tensor as NPY v1.0 little-endian float32, C-order."""
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.float32))
    if arr.ndim != 2:
        raise ShapeError(f"embedding tensor must be 2-D, got {arr.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, arr)


def write_pianoroll(path: Path, roll: np.ndarray):
    arr = np.ascontiguousarray(np.asarray(roll, dtype=np.uint8))
    if arr.ndim != 2 or arr.shape[1] != N_PITCHES:
        raise ShapeError(f"pianoroll must be (T, {N_PITCHES}), got {arr.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, arr)


def _load_npy(path: Path, expected_dtype: np.dtype, item_id: str) -> np.ndarray:
    if not path.exists():
        raise ValidationError(f"tensor file missing: {path}", item_id=item_id)
    arr = np.load(path, allow_pickle=False)
    if arr.dtype != expected_dtype:
        raise ValidationError(
            f"tensor {path.name}: dtype {arr.dtype} != required {expected_dtype}",
            item_id=item_id,
        )
    if arr.ndim != 2:
        raise ValidationError(
            f"tensor {path.name}: expected 2-D, got shape {arr.shape}", item_id=item_id
        )
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    return arr


_HEADER_KEYS = {"labels", "param_norm", "streams", "version"}
_RECORD_KEYS = {"item_id", "labels", "split", "tensors", "view"}
_VIEW_KEYS = {"base_item_id", "param_norm", "param_raw", "transform"}
_LABEL_KEYS = {"group_id", "instrument_id", "pitch_class", "chord_type",
               "tempo_bpm", "pianoroll"}


def _parse_header(obj, line_no) -> ManifestHeader:
    if not isinstance(obj, dict) or "streams" not in obj:
        raise ParseError("header object must declare 'streams'", line=line_no)
    unknown = set(obj) - _HEADER_KEYS
    if unknown:
        raise ParseError(f"unknown header keys {sorted(unknown)}", line=line_no)
    streams = {}
    for name, info in obj["streams"].items():
        if name not in STREAMS:
            raise ParseError(f"unknown stream '{name}'", line=line_no)
        dim, frames = int(info["dim"]), int(info["frames"])
        if dim < 1 or frames < 1:
            raise ParseError(f"stream '{name}': dim/frames must be >= 1", line=line_no)
        streams[name] = StreamInfo(dim=dim, frames=frames)
    if not streams:
        raise ParseError("header declares no streams", line=line_no)
    param_norm = {}
    for t, s in obj.get("param_norm", {}).items():
        if t not in TRANSFORMS or t == "none":
            raise ParseError(f"param_norm for unknown transform '{t}'", line=line_no)
        scale = float(s["scale"])
        if scale <= 0:
            raise ParseError(f"param_norm scale for '{t}' must be > 0", line=line_no)
        param_norm[t] = ParamScaling(scale=scale, offset=float(s["offset"]))
    return ManifestHeader(
        streams=streams, param_norm=param_norm, labels=dict(obj.get("labels", {}))
    )


def _parse_record(obj, line_no) -> ManifestRecord:
    if not isinstance(obj, dict):
        raise ParseError("record line is not an object", line=line_no)
    missing = _RECORD_KEYS - set(obj)
    if missing:
        raise ParseError(f"record missing keys {sorted(missing)}", line=line_no)
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise ParseError(f"unknown record keys {sorted(unknown)}", line=line_no)
    item_id = obj["item_id"]
    if not isinstance(item_id, str) or not item_id:
        raise ParseError("item_id must be a non-empty string", line=line_no)
    if obj["split"] not in SPLITS:
        raise ValidationError(f"unknown split '{obj['split']}'", item_id=item_id)

    view_obj = obj["view"]
    unknown = set(view_obj) - _VIEW_KEYS
    if unknown:
        raise ParseError(f"unknown view keys {sorted(unknown)}", line=line_no)
    transform = view_obj.get("transform", "none")
    if transform not in TRANSFORMS:
        raise ValidationError(f"unknown transform '{transform}'", item_id=item_id)
    view = ViewMeta(
        base_item_id=view_obj["base_item_id"],
        transform=transform,
        param_raw=float(view_obj.get("param_raw", 0.0)),
        param_norm=float(view_obj.get("param_norm", 0.0)),
    )

    labels_obj = obj["labels"]
    unknown = set(labels_obj) - _LABEL_KEYS
    if unknown:
        raise ParseError(f"unknown label keys {sorted(unknown)}", line=line_no)
    if "group_id" not in labels_obj:
        raise ValidationError("labels must carry group_id", item_id=item_id)

    def _opt_int(key):
        return None if labels_obj.get(key) is None else int(labels_obj[key])

    labels = LabelSet(
        group_id=str(labels_obj["group_id"]),
        instrument_id=_opt_int("instrument_id"),
        pitch_class=_opt_int("pitch_class"),
        chord_type=_opt_int("chord_type"),
        tempo_bpm=None if labels_obj.get("tempo_bpm") is None
        else float(labels_obj["tempo_bpm"]),
    )
    return ManifestRecord(
        item_id=item_id,
        split=obj["split"],
        tensor_paths=dict(obj["tensors"]),
        labels=labels,
        view=view,
        pianoroll_path=labels_obj.get("pianoroll"),
    )


def _validate_labels(rec: ManifestRecord):
    lab = rec.labels
    if lab.pitch_class is not None and not 0 <= lab.pitch_class <= 11:
        raise ValidationError(f"pitch_class {lab.pitch_class} outside 0..11",
                              item_id=rec.item_id)
    if lab.chord_type is not None and not 0 <= lab.chord_type <= 3:
        raise ValidationError(f"chord_type {lab.chord_type} outside 0..3",
                              item_id=rec.item_id)
    if lab.instrument_id is not None and lab.instrument_id < 0:
        raise ValidationError("instrument_id must be >= 0", item_id=rec.item_id)
    if lab.tempo_bpm is not None and lab.tempo_bpm <= 0:
        raise ValidationError("tempo_bpm must be > 0", item_id=rec.item_id)


def _validate_view(rec: ManifestRecord, header: ManifestHeader, by_id):
    view = rec.view
    if view.transform == "none":
        if view.param_raw != 0.0 or view.param_norm != 0.0:
            raise ValidationError("transform 'none' requires zero params",
                                  item_id=rec.item_id)
        return
    base = by_id.get(view.base_item_id)
    if base is None:
        raise ValidationError(
            f"base_item_id '{view.base_item_id}' does not resolve",
            item_id=rec.item_id,
        )
    if base.view.transform != "none":
        raise ValidationError(
            f"base '{view.base_item_id}' is itself a transformed view",
            item_id=rec.item_id,
        )
    if base.split != rec.split:
        raise ValidationError(
            f"base '{view.base_item_id}' lives in split '{base.split}', "
            f"view in '{rec.split}'",
            item_id=rec.item_id,
        )
    if not -1.0 <= view.param_norm <= 1.0:
        raise ValidationError(f"param_norm {view.param_norm} outside [-1, 1]",
                              item_id=rec.item_id)
    scaling = header.param_norm.get(view.transform)
    if scaling is None:
        raise ValidationError(
            f"header declares no param_norm scaling for '{view.transform}'",
            item_id=rec.item_id,
        )
    expected = scaling.normalize(view.param_raw)
    if not math.isclose(expected, view.param_norm, rel_tol=1e-9, abs_tol=1e-9):
        raise ValidationError(
            f"param_norm {view.param_norm} != affine({view.param_raw}) = {expected}",
            item_id=rec.item_id,
        )


def load_manifest(path) -> DatasetManifest:
    """Load and eagerly validate a dataset; raises on the first violation."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    if not path.exists():
        raise ParseError(f"manifest not found: {path}")
    root = path.parent

    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty manifest", line=1)

    def _loads(line, line_no):
        try:
            return json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed JSON ({e.msg})", line=line_no) from e

    header = _parse_header(_loads(lines[0], 1), 1)

    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise ParseError("blank line in manifest", line=i)
        records.append(_parse_record(_loads(line, i), i))

    by_id = {}
    for rec in records:
        if rec.item_id in by_id:
            raise ValidationError("duplicate item_id", item_id=rec.item_id)
        by_id[rec.item_id] = rec

    embeddings = {}
    for pos, rec in enumerate(records):
        _validate_labels(rec)
        _validate_view(rec, header, by_id)
        declared = set(header.streams)
        if set(rec.tensor_paths) != declared:
            raise ValidationError(
                f"record streams {sorted(rec.tensor_paths)} != header streams "
                f"{sorted(declared)}",
                item_id=rec.item_id,
            )
        for stream, rel in rec.tensor_paths.items():
            arr = _load_npy(root / rel, EMBEDDING_DTYPE, rec.item_id)
            info = header.streams[stream]
            if arr.shape != (info.frames, info.dim):
                raise ValidationError(
                    f"stream '{stream}' tensor shape {arr.shape} != declared "
                    f"({info.frames}, {info.dim})",
                    item_id=rec.item_id,
                )
            if not np.isfinite(arr).all():
                raise ValidationError(
                    f"stream '{stream}' tensor contains NaN/Inf", item_id=rec.item_id
                )
            embeddings[(rec.item_id, stream)] = arr
        if rec.pianoroll_path is not None:
            roll = _load_npy(root / rec.pianoroll_path, PIANOROLL_DTYPE, rec.item_id)
            if roll.shape[1] != N_PITCHES:
                raise ValidationError(
                    f"pianoroll has {roll.shape[1]} pitches, expected {N_PITCHES}",
                    item_id=rec.item_id,
                )
            if roll.size and roll.max() > 1:
                raise ValidationError("pianoroll entries must be 0/1",
                                      item_id=rec.item_id)
            rec = replace(rec, labels=replace(rec.labels, pianoroll=roll))
            records[pos] = rec
            by_id[rec.item_id] = rec

    return DatasetManifest(header, records, embeddings, root)


def save_manifest(manifest: DatasetManifest, path=None) -> Path:
    """Serialize to canonical JSONL; loading a canonical file round-trips."""
    path = Path(path) if path is not None else manifest.root / "manifest.jsonl"
    lines = [canonical_json(manifest.header.to_obj())]
    lines.extend(canonical_json(rec.to_obj()) for rec in manifest.records)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def pool_time(rec: EmbeddingRecord) -> EmbeddingRecord:
    """Average-pool over the time dimension; identity for global vectors."""
    if rec.data.shape[0] == 1:
        return rec
    pooled = rec.data.astype(np.float64).mean(axis=0, keepdims=True)
    return replace(rec, data=pooled.astype(np.float32), frame_rate=1)


def concat_streams(a: EmbeddingRecord, b: EmbeddingRecord) -> EmbeddingRecord:
    """Concatenate two pooled streams of one item: a's dims then b's dims."""
    if a.item_id != b.item_id:
        raise MismatchError(
            f"cannot concatenate embeddings of '{a.item_id}' and '{b.item_id}'"
        )
    if a.data.shape[0] != 1 or b.data.shape[0] != 1:
        raise ShapeError("concat_streams requires both inputs pooled to T=1")
    data = np.concatenate([a.data, b.data], axis=1)
    return EmbeddingRecord(item_id=a.item_id, stream="concat",
                           data=np.ascontiguousarray(data), frame_rate=1)


def pair_views(manifest: DatasetManifest, transform: str, stream: str):
    """Match transformed views with their clean bases for one stream.

    Returns a list of (clean, transformed, param_norm) sorted by the view's
    item_id. Pairing is per stream, so the stream is explicit.
    """
    if transform == "none":
        raise EmptyError("'none' marks clean records; it has no view pairs")
    views = [r for r in manifest.records if r.view.transform == transform]
    if not views:
        raise EmptyError(f"no views with transform '{transform}'")
    if stream not in manifest.header.streams:
        raise EmptyError(f"stream '{stream}' not present in dataset")
    pairs = []
    for rec in sorted(views, key=lambda r: r.item_id):
        clean = manifest.embedding(rec.view.base_item_id, stream)
        transformed = manifest.embedding(rec.item_id, stream)
        pairs.append((clean, transformed, rec.view.param_norm))
    return pairs


def align_pianoroll(labels: LabelSet, target_frames: int) -> np.ndarray:
    """Nearest-frame resampling of a binary roll to target_frames rows.

    Target frame i takes source frame round_half_up(i * T_lab / target);
    labels stay binary by construction (no interpolation).
    """
    if labels.pianoroll is None:
        raise MissingLabelError("record has no pianoroll label")
    if target_frames < 1:
        raise ShapeError("target_frames must be >= 1")
    roll = labels.pianoroll
    t_lab = roll.shape[0]
    if t_lab == target_frames:
        return roll.copy()
    # round-half-up in exact integer arithmetic: floor(i*T_lab/target + 1/2)
    i = np.arange(target_frames, dtype=np.int64)
    idx = (2 * i * t_lab + target_frames) // (2 * target_frames)
    idx = np.clip(idx, 0, t_lab - 1)
    return roll[idx].copy()
