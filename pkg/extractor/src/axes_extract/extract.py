"""Extraction pipeline: audio corpus + encoder checkpoint -> dataset directory.

For every segment of every corpus file the pipeline writes clean-view
embeddings for both streams, then one transformed view per configured pitch
shift and time stretch. Instrument-change views come from a CSV sidecar
mapping re-rendered variant files to their base files with a precomputed
timbre-dissimilarity scalar (the adapter never computes dissimilarity).
Decode failures are collected per file and the run continues.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .audio import AUDIO_SUFFIXES, fit_length, read_audio, segment
from .encoders import load_encoder
from .errors import CodecError, ExtractError, SidecarError
from .manifest import ManifestBuilder, ParamAffine, write_tensor
from .models import model_config
from .transforms import pitch_shift, time_stretch

SPLIT_FRACTIONS = (0.6, 0.2, 0.2)


@dataclass(frozen=True)
class ExtractorSpec:
    model: str
    checkpoint: str
    segment_seconds: float = 4.0
    pitch_shifts: tuple = ()
    time_stretches: tuple = ()

    def validate(self):
        model_config(self.model)
        if self.segment_seconds <= 0:
            raise ExtractError("segment_seconds must be positive")
        if any(r <= 0 for r in self.time_stretches):
            raise ExtractError("time stretch ratios must be positive")


@dataclass
class ExtractReport:
    manifest_path: Path | None = None
    n_clean: int = 0
    n_views: int = 0
    errors: list = field(default_factory=list)  # (file, message)
    notes: list = field(default_factory=list)


def _split_for(stem: str) -> str:
    """Stable track-level split so views never straddle splits."""
    digest = hashlib.sha256(stem.encode()).digest()
    u = int.from_bytes(digest[:8], "little") / 2.0**64
    if u < SPLIT_FRACTIONS[0]:
        return "train"
    if u < SPLIT_FRACTIONS[0] + SPLIT_FRACTIONS[1]:
        return "val"
    return "test"


def _read_sidecar(path, corpus: Path) -> dict:
    """variant file -> (base file, dissimilarity)."""
    mapping = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        required = {"variant_file", "base_file", "dissimilarity"}
        if reader.fieldnames is None or required - set(reader.fieldnames):
            raise SidecarError(
                f"sidecar needs columns {sorted(required)}, "
                f"got {reader.fieldnames}")
        for row in reader:
            variant = corpus / row["variant_file"]
            base = corpus / row["base_file"]
            mapping[variant] = (base, float(row["dissimilarity"]))
    return mapping


def extract(spec: ExtractorSpec, corpus_path, out_dir,
            dissim_csv=None) -> ExtractReport:
    """Run extraction; the resulting directory passes `axes-eval validate`."""
    spec.validate()
    encoder = load_encoder(spec.model, spec.checkpoint)
    config = encoder.config
    corpus = Path(corpus_path)
    out_dir = Path(out_dir)
    report = ExtractReport()

    files = sorted(p for p in corpus.rglob("*")
                   if p.suffix.lower() in AUDIO_SUFFIXES)
    if not files:
        raise ExtractError(f"no audio files under {corpus}")

    variants = _read_sidecar(dissim_csv, corpus) if dissim_csv else {}
    for variant, (base, _) in variants.items():
        if not variant.exists():
            raise SidecarError(f"sidecar variant file missing: {variant}")
        if not base.exists():
            raise SidecarError(f"sidecar base file missing: {base}")

    affines = {}
    if spec.pitch_shifts:
        affines["pitch_shift"] = ParamAffine.covering(spec.pitch_shifts)
    if spec.time_stretches:
        affines["time_stretch"] = ParamAffine.covering(spec.time_stretches)
    if variants:
        affines["instrument_change"] = ParamAffine.covering(
            [d for _, d in variants.values()])

    builder = ManifestBuilder(
        timbre_dim=config.timbre_dim,
        structure_dim=config.structure_dim,
        temporal_res=config.temporal_res,
        param_affines=affines,
    )

    def emit(item_id: str, samples, sr, split, group, transform="none",
             base_item_id=None, param_raw=0.0):
        embeddings = encoder.encode(samples, sr)
        tensors = {}
        for stream, data in embeddings.items():
            rel = f"tensors/{item_id}.{stream}.npy"
            write_tensor(out_dir / rel, data)
            tensors[stream] = rel
        builder.add(item_id, split, group, tensors, transform=transform,
                    base_item_id=base_item_id, param_raw=param_raw)

    base_segments = {}  # file stem -> number of clean segments
    for path in files:
        if path in variants:
            continue
        try:
            samples, sr = read_audio(path)
        except CodecError as e:
            report.errors.append((str(path), str(e)))
            continue
        segments = segment(samples, sr, spec.segment_seconds)
        if not segments:
            report.notes.append(f"{path.name}: shorter than one segment")
            continue
        stem = path.stem
        split = _split_for(stem)
        base_segments[stem] = len(segments)
        seg_len = len(segments[0])
        for i, seg in enumerate(segments):
            item_id = f"{stem}.s{i:03d}"
            emit(item_id, seg, sr, split, stem)
            report.n_clean += 1
            for k, semis in enumerate(spec.pitch_shifts):
                shifted = fit_length(pitch_shift(seg, semis), seg_len)
                emit(f"{item_id}.pitch_shift.{k}", shifted, sr, split, stem,
                     transform="pitch_shift", base_item_id=item_id,
                     param_raw=float(semis))
                report.n_views += 1
            for k, ratio in enumerate(spec.time_stretches):
                stretched = fit_length(time_stretch(seg, ratio), seg_len)
                emit(f"{item_id}.time_stretch.{k}", stretched, sr, split, stem,
                     transform="time_stretch", base_item_id=item_id,
                     param_raw=float(ratio))
                report.n_views += 1

    for variant_path in sorted(variants):
        base_path, dissim = variants[variant_path]
        base_stem = base_path.stem
        if base_stem not in base_segments:
            report.errors.append(
                (str(variant_path), f"base '{base_path.name}' produced no "
                                    f"clean segments"))
            continue
        try:
            samples, sr = read_audio(variant_path)
        except CodecError as e:
            report.errors.append((str(variant_path), str(e)))
            continue
        segments = segment(samples, sr, spec.segment_seconds)
        n = min(len(segments), base_segments[base_stem])
        if n < base_segments[base_stem]:
            report.notes.append(
                f"{variant_path.name}: covers {n} of "
                f"{base_segments[base_stem]} base segments")
        split = _split_for(base_stem)
        for i in range(n):
            base_id = f"{base_stem}.s{i:03d}"
            emit(f"{base_id}.instrument_change.{variant_path.stem}",
                 segments[i], sr, split, base_stem,
                 transform="instrument_change", base_item_id=base_id,
                 param_raw=dissim)
            report.n_views += 1

    if report.n_clean == 0:
        raise ExtractError("no segments extracted; see per-file errors")
    report.manifest_path = builder.write(out_dir)
    return report
