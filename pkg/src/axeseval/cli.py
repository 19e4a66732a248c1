"""Command-line entry point: run / report / synth / validate."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import datamodel as dm
from . import runner as rn
from . import synthworld as sw
from .errors import EngineError
from .report import emit_table


def _cmd_run(args) -> int:
    config = rn.RunConfig.from_file(args.config)
    if args.seeds:
        config.seeds = [int(s) for s in args.seeds.split(",")]
    if args.workers:
        config.workers = args.workers
    if args.out:
        config.output_dir = args.out
    summary = rn.run(config)
    print(f"results: {summary.results_path}")
    print(f"cells done: {summary.n_done}, skipped: {summary.n_skipped}, "
          f"degenerate: {summary.n_degenerate}")
    for cell, reason in summary.skipped:
        print(f"  skipped {cell}: {reason}")
    return summary.exit_code


def _cmd_report(args) -> int:
    variants = {}
    if args.variants:
        for pair in args.variants.split(","):
            variant, _, base = pair.partition("=")
            if not base:
                raise EngineError(f"--variants entries are VARIANT=BASE, got '{pair}'")
            variants[variant.strip()] = base.strip()
    sys.stdout.write(emit_table(args.results, args.axis, variants))
    return 0


def _cmd_synth(args) -> int:
    spec = sw.load_world_spec(args.spec)
    manifest = sw.generate_world(spec, Path(args.out))
    n_views = sum(1 for r in manifest.records if r.view.transform != "none")
    print(f"wrote {args.out}: {len(manifest.records)} records "
          f"({len(manifest.records) - n_views} clean, {n_views} views)")
    return 0


def _cmd_validate(args) -> int:
    manifest = dm.load_manifest(args.manifest)
    print(f"OK: {len(manifest.records)} records, "
          f"streams {', '.join(manifest.streams)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axes-eval",
        description="Evaluate paired timbre/structure embedding datasets "
                    "along informativeness, equivariance, invariance, and "
                    "disentanglement axes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the evaluation grid")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seeds", help="comma-separated seed override")
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--out", help="output directory override")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="emit a markdown table for one axis")
    p_rep.add_argument("--results", required=True)
    p_rep.add_argument("--axis", required=True)
    p_rep.add_argument("--variants",
                       help="comma-separated VARIANT=BASE row declarations")
    p_rep.set_defaults(func=_cmd_report)

    p_syn = sub.add_parser("synth", help="generate a synthetic world")
    p_syn.add_argument("--spec", required=True)
    p_syn.add_argument("--out", required=True)
    p_syn.set_defaults(func=_cmd_synth)

    p_val = sub.add_parser("validate", help="validate a dataset manifest")
    p_val.add_argument("--manifest", required=True)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
