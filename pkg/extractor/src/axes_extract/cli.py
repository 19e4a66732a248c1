"""CLI: extract embeddings from an audio corpus into the engine's format."""

from __future__ import annotations

import argparse
import sys

from .encoders import make_reference_checkpoint
from .errors import ExtractError
from .extract import ExtractorSpec, extract
from .models import MODEL_TABLE


def _floats(text):
    return tuple(float(v) for v in text.split(",")) if text else ()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axes-extract",
        description="Extract timbre/structure embeddings from audio into an "
                    "axes-eval dataset directory.",
    )
    parser.add_argument("--model", required=True, choices=sorted(MODEL_TABLE))
    parser.add_argument("--ckpt", required=True, help="encoder checkpoint (.npz)")
    parser.add_argument("--corpus", required=True, help="audio directory")
    parser.add_argument("--out", required=True, help="dataset output directory")
    parser.add_argument("--segment-seconds", type=float, default=4.0)
    parser.add_argument("--pitch-shifts", default="",
                        help="comma-separated semitone values, e.g. -2,2")
    parser.add_argument("--time-stretches", default="",
                        help="comma-separated stretch ratios, e.g. 0.8,1.25")
    parser.add_argument("--dissim-csv",
                        help="instrument-change sidecar "
                             "(variant_file,base_file,dissimilarity)")
    parser.add_argument("--create-reference-checkpoint", action="store_true",
                        help="write a reference checkpoint at --ckpt first")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for --create-reference-checkpoint")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.create_reference_checkpoint:
            make_reference_checkpoint(args.model, args.ckpt, seed=args.seed)
            print(f"wrote reference checkpoint {args.ckpt}")
        spec = ExtractorSpec(
            model=args.model,
            checkpoint=args.ckpt,
            segment_seconds=args.segment_seconds,
            pitch_shifts=_floats(args.pitch_shifts),
            time_stretches=_floats(args.time_stretches),
        )
        report = extract(spec, args.corpus, args.out,
                         dissim_csv=args.dissim_csv)
    except ExtractError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {report.manifest_path}: {report.n_clean} clean records, "
          f"{report.n_views} transformed views")
    for note in report.notes:
        print(f"  note: {note}")
    for path, message in report.errors:
        print(f"  failed {path}: {message}", file=sys.stderr)
    return 2 if report.errors else 0


if __name__ == "__main__":
    sys.exit(main())
