"""Grid orchestration: axis x task x model x seed with cached, resumable cells.

Each cell is keyed by a fingerprint over the configuration subset that
determines it (model, axis, task/transform, stream, seed, probe overrides,
options, dataset header hash). Finished cells are stored one file per cell
under <output_dir>/cells/, so rerunning over an existing output directory
recomputes only what is missing and yields the same results file as a
fresh run. Inapplicable combinations are skipped with a logged reason.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import axes as ax
from . import datamodel as dm
from .errors import (
    ConfigError,
    DegenerateError,
    EmptyError,
    MissingLabelError,
)

log = logging.getLogger("axeseval.runner")

_CONFIG_KEYS = {"datasets", "tasks", "axes", "transforms", "seeds",
                "probe_overrides", "workers", "output_dir", "options"}
_TASK_KEYS = {"name", "stream", "target", "metric"}
_OPTION_KEYS = {"p_equivariance_single_view", "invariance_frame_wise",
                "mig_bins"}

DISCRETE_FACTOR_FIELDS = ("chord_type", "instrument_id", "pitch_class")


@dataclass
class RunConfig:
    datasets: dict
    tasks: list
    axes: list
    seeds: list
    transforms: list = field(default_factory=list)
    probe_overrides: dict = field(default_factory=dict)
    workers: int = 1
    output_dir: str = "out"
    options: dict = field(default_factory=dict)

    def validate(self):
        if not self.datasets:
            raise ConfigError("config needs at least one dataset")
        if not self.tasks:
            raise ConfigError("config needs at least one task")
        if not self.axes:
            raise ConfigError("config needs at least one axis")
        if not self.seeds:
            raise ConfigError("config needs a non-empty seed list")
        for axis in self.axes:
            if axis not in ax.AXES:
                raise ConfigError(f"unknown axis '{axis}'")
        for t in self.transforms:
            if t not in dm.TRANSFORMS or t == "none":
                raise ConfigError(f"unknown transform '{t}'")
        unknown = set(self.options) - _OPTION_KEYS
        if unknown:
            raise ConfigError(f"unknown option keys {sorted(unknown)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # resolve probe overrides eagerly so bad keys abort before training
        ax.resolve_probe_spec("linear_regressor", 1, 1, 0, self.probe_overrides)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON ({e.msg})") from e
        unknown = set(obj) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for required in ("datasets", "tasks", "axes", "seeds"):
            if required not in obj:
                raise ConfigError(f"config missing '{required}'")
        tasks = []
        for t in obj["tasks"]:
            unknown = set(t) - _TASK_KEYS
            if unknown:
                raise ConfigError(f"unknown task keys {sorted(unknown)}")
            tasks.append(ax.TaskSpec(**t))
        datasets = {
            name: str((path.parent / p))
            for name, p in obj["datasets"].items()
        }
        cfg = cls(
            datasets=datasets,
            tasks=tasks,
            axes=list(obj["axes"]),
            seeds=[int(s) for s in obj["seeds"]],
            transforms=list(obj.get("transforms", [])),
            probe_overrides=dict(obj.get("probe_overrides", {})),
            workers=int(obj.get("workers", 1)),
            output_dir=str(obj.get("output_dir", "out")),
            options=dict(obj.get("options", {})),
        )
        cfg.validate()
        return cfg


@dataclass
class RunSummary:
    results_path: Path
    n_done: int = 0
    n_skipped: int = 0
    n_degenerate: int = 0
    skipped: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if (self.n_skipped or self.n_degenerate) else 0


@dataclass(frozen=True)
class _Cell:
    model: str
    axis: str
    task_name: str = ""
    transform: str = ""
    stream: str = ""
    seed: int = 0

    def describe(self) -> str:
        if self.task_name:
            what = self.task_name
        elif self.transform:
            what = f"{self.transform}/{self.stream}"
        else:
            what = self.stream
        return f"{self.model}:{self.axis}:{what}:seed{self.seed}"


def _cell_fingerprint(cell: _Cell, config: RunConfig, dataset_hash: str) -> str:
    payload = {
        "axis": cell.axis,
        "dataset": dataset_hash,
        "model": cell.model,
        "options": {k: config.options[k] for k in sorted(config.options)},
        "probe_overrides": {k: config.probe_overrides[k]
                            for k in sorted(config.probe_overrides)},
        "seed": cell.seed,
        "stream": cell.stream,
        "task": cell.task_name,
        "transform": cell.transform,
    }
    return hashlib.sha256(dm.canonical_json(payload).encode()).hexdigest()[:16]


def discrete_factors(manifest) -> list:
    """Label fields usable as MIG factors: discrete, >= 2 values present."""
    usable = []
    for name in DISCRETE_FACTOR_FIELDS:
        values = {r.labels.get(name) for r in manifest.clean_records()}
        values.discard(None)
        if len(values) >= 2:
            usable.append(name)
    return usable


def _plan(config: RunConfig, manifests: dict) -> list:
    cells = []
    for model in sorted(config.datasets):
        manifest = manifests[model]
        streams = manifest.streams
        for axis in sorted(config.axes):
            if axis in ("informativeness", "disentanglement_delta"):
                for task in config.tasks:
                    for seed in config.seeds:
                        cells.append(_Cell(model=model, axis=axis,
                                           task_name=task.name,
                                           stream=task.stream, seed=seed))
            elif axis in ("p_equivariance", "r_equivariance"):
                for transform in sorted(config.transforms):
                    for stream in streams:
                        for seed in config.seeds:
                            cells.append(_Cell(model=model, axis=axis,
                                               transform=transform,
                                               stream=stream, seed=seed))
            elif axis == "invariance":
                for transform in sorted(config.transforms):
                    for stream in streams:
                        cells.append(_Cell(model=model, axis=axis,
                                           transform=transform,
                                           stream=stream))
            elif axis == "mig":
                for stream in streams:
                    cells.append(_Cell(model=model, axis=axis, stream=stream))
    return cells


def _execute(cell: _Cell, config: RunConfig, manifest) -> ax.AxisResult:
    overrides = config.probe_overrides
    if cell.axis == "informativeness":
        task = next(t for t in config.tasks if t.name == cell.task_name)
        return ax.run_informativeness(manifest, task, seed=cell.seed,
                                      overrides=overrides)
    if cell.axis == "disentanglement_delta":
        task = next(t for t in config.tasks if t.name == cell.task_name)
        return ax.run_disentanglement_delta(manifest, task, seed=cell.seed,
                                            overrides=overrides)
    if cell.axis == "p_equivariance":
        return ax.run_p_equivariance(
            manifest, cell.stream, cell.transform, seed=cell.seed,
            overrides=overrides,
            single_view=bool(config.options.get("p_equivariance_single_view")),
        )
    if cell.axis == "r_equivariance":
        return ax.run_r_equivariance(manifest, cell.stream, cell.transform,
                                     seed=cell.seed, overrides=overrides)
    if cell.axis == "invariance":
        return ax.run_invariance(
            manifest, cell.stream, cell.transform,
            frame_wise=bool(config.options.get("invariance_frame_wise")),
        )
    if cell.axis == "mig":
        factors = discrete_factors(manifest)
        if len(factors) < 2:
            raise DegenerateError(
                f"dataset has {len(factors)} usable discrete factors, need 2")
        return ax.run_mig(manifest, cell.stream, factors,
                          n_bins=int(config.options.get("mig_bins", ax.MIG_BINS)))
    raise ConfigError(f"unknown axis '{cell.axis}'")


def run(config: RunConfig) -> RunSummary:
    """Execute the grid; returns the summary with the results file path.

    Deterministic: identical config and seeds produce byte-identical result
    files, whether computed fresh or resumed from cached cells.
    """
    config.validate()
    manifests = {name: dm.load_manifest(path)
                 for name, path in sorted(config.datasets.items())}

    out_dir = Path(config.output_dir)
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    cells = _plan(config, manifests)
    summary = RunSummary(results_path=out_dir / "results.jsonl")
    result_objs = []

    def _one(cell: _Cell):
        fp = _cell_fingerprint(cell, config,
                               manifests[cell.model].dataset_hash)
        cache = cells_dir / f"{fp}.json"
        if cache.exists():
            return cell, json.loads(cache.read_text(encoding="utf-8")), None
        try:
            result = _execute(cell, config, manifests[cell.model])
        except (DegenerateError, EmptyError, MissingLabelError) as e:
            return cell, None, str(e)
        result.model = cell.model
        obj = result.to_obj()
        tmp = cache.with_suffix(".tmp")
        tmp.write_text(dm.canonical_json(obj) + "\n", encoding="utf-8")
        tmp.rename(cache)
        return cell, obj, None

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_one, cells))
    else:
        outcomes = [_one(cell) for cell in cells]

    for cell, obj, skip_reason in outcomes:
        if obj is None:
            log.info("skipped %s: %s", cell.describe(), skip_reason)
            summary.n_skipped += 1
            summary.skipped.append((cell.describe(), skip_reason))
            continue
        summary.n_done += 1
        if obj.get("extra", {}).get("degenerate_params"):
            summary.n_degenerate += 1
        result_objs.append(obj)

    result_objs.sort(key=ax.result_sort_key)
    lines = [dm.canonical_json(obj) for obj in result_objs]
    summary.results_path.write_text(
        "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return summary
