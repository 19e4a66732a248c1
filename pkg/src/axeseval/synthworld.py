"""Synthetic two-stream worlds with known factor structure.

Each stream is a linear layout of blocks: factors assigned to the stream
contribute their encoding scaled by own_gain, factors assigned to the other
stream leak in scaled by leak_gain, remaining dims carry pure noise.
Isotropic Gaussian noise is added everywhere, per frame. Because every
readout is linear with known gains, Bayes accuracies and expected
invariances are computable by the oracle, closed-form where exact and by
Monte-Carlo otherwise.

Transformed views apply the configured action to the realized base
embedding of one stream; the other stream is copied byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import datamodel as dm
from .errors import ConfigError, UnsupportedQueryError
from .numerics import Rng

LABEL_FIELDS = ("instrument_id", "pitch_class", "chord_type", "tempo_bpm")
MC_SAMPLES = 100_000


@dataclass(frozen=True)
class FactorSpec:
    """One factor of variation and where/how strongly it is encoded."""

    name: str           # label field it feeds
    kind: str           # categorical | continuous
    stream: str         # assigned stream
    k: int | None = None
    lo: float | None = None
    hi: float | None = None
    encoding: str = "onehot"   # onehot | scalar (categorical only)
    own_gain: float = 1.0
    leak_gain: float = 0.0

    def width(self) -> int:
        return self.k if (self.kind == "categorical" and
                          self.encoding == "onehot") else 1

    def validate(self):
        if self.name not in LABEL_FIELDS:
            raise ConfigError(f"factor name '{self.name}' is not a label field")
        if self.stream not in dm.STREAMS:
            raise ConfigError(f"factor '{self.name}': unknown stream '{self.stream}'")
        if not (0.0 <= self.own_gain <= 1.0 and 0.0 <= self.leak_gain <= 1.0):
            raise ConfigError(f"factor '{self.name}': gains must lie in [0, 1]")
        if self.kind == "categorical":
            if self.name == "tempo_bpm":
                raise ConfigError("tempo_bpm is a continuous label field")
            if self.k is None or self.k < 2:
                raise ConfigError(f"factor '{self.name}': categorical needs k >= 2")
            if self.name == "pitch_class" and self.k > 12:
                raise ConfigError("pitch_class supports at most 12 classes")
            if self.name == "chord_type" and self.k > 4:
                raise ConfigError("chord_type supports at most 4 classes")
            if self.encoding not in ("onehot", "scalar"):
                raise ConfigError(f"unknown encoding '{self.encoding}'")
        elif self.kind == "continuous":
            if self.name != "tempo_bpm":
                raise ConfigError("continuous factors feed tempo_bpm")
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ConfigError(f"factor '{self.name}': needs lo < hi")
            if self.lo <= 0:
                raise ConfigError("tempo_bpm range must be positive")
        else:
            raise ConfigError(f"unknown factor kind '{self.kind}'")


@dataclass(frozen=True)
class TransformModel:
    """How a transform acts on the realized embedding of one stream."""

    stream: str
    kind: str                     # additive | linear | noise
    params_norm: tuple | None = None   # explicit set; None = uniform [-1, 1]
    views_per_item: int = 1
    direction: tuple | None = None     # additive only; unit-normalized
    raw_scale: float = 1.0             # param_raw = norm * scale + offset
    raw_offset: float = 0.0
    noise_scale: float = 1.0           # kind == noise only

    def validate(self, name):
        if self.stream not in dm.STREAMS:
            raise ConfigError(f"transform '{name}': unknown stream '{self.stream}'")
        if self.kind not in ("additive", "linear", "noise"):
            raise ConfigError(f"transform '{name}': unknown kind '{self.kind}'")
        if self.views_per_item < 1:
            raise ConfigError(f"transform '{name}': views_per_item must be >= 1")
        if self.raw_scale <= 0:
            raise ConfigError(f"transform '{name}': raw_scale must be > 0")
        if self.params_norm is not None:
            if not self.params_norm:
                raise ConfigError(f"transform '{name}': empty parameter set")
            if any(not -1.0 <= p <= 1.0 for p in self.params_norm):
                raise ConfigError(f"transform '{name}': params outside [-1, 1]")


@dataclass(frozen=True)
class FactorWorldSpec:
    n_items: int
    dims: dict = field(default_factory=dict)      # stream -> D
    factors: tuple = ()
    noise_std: float = 0.0
    frames: dict = field(default_factory=dict)    # stream -> T (default 1)
    transforms: dict = field(default_factory=dict)
    splits: tuple = (0.6, 0.2, 0.2)
    group_size: int = 1
    pianoroll_from: str | None = None
    pianoroll_frames: int | None = None
    base_pitch: int = 60
    seed: int = 0

    def stream_frames(self, stream) -> int:
        return int(self.frames.get(stream, 1))

    def validate(self):
        if self.n_items < 3:
            raise ConfigError("n_items must be >= 3 (one per split)")
        if set(self.dims) != set(dm.STREAMS):
            raise ConfigError(f"dims must cover streams {dm.STREAMS}")
        if any(d < 1 for d in self.dims.values()):
            raise ConfigError("stream dims must be >= 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if len(self.splits) != 3 or abs(sum(self.splits) - 1.0) > 1e-9 or \
                any(f <= 0 for f in self.splits):
            raise ConfigError("splits must be three positive fractions summing to 1")
        if self.group_size < 1:
            raise ConfigError("group_size must be >= 1")
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise ConfigError("factor names must be unique")
        for f in self.factors:
            f.validate()
        for name, model in self.transforms.items():
            if name not in dm.TRANSFORMS or name == "none":
                raise ConfigError(f"unknown transform '{name}'")
            model.validate(name)
        layout = _stream_layout(self)
        for stream, blocks in layout.items():
            used = sum(w for _, _, _, w in blocks)
            if used > self.dims[stream]:
                raise ConfigError(
                    f"stream '{stream}': factor blocks need {used} dims, "
                    f"only {self.dims[stream]} declared"
                )
        if self.pianoroll_from is not None:
            f = next((f for f in self.factors if f.name == self.pianoroll_from), None)
            if f is None or f.kind != "categorical":
                raise ConfigError("pianoroll_from must name a categorical factor")
            if self.base_pitch < 0 or self.base_pitch + f.k > dm.N_PITCHES:
                raise ConfigError("pianoroll pitches out of range")

    def to_obj(self) -> dict:
        obj = {
            "n_items": self.n_items,
            "dims": dict(self.dims),
            "factors": [
                {k: v for k, v in vars(f).items() if v is not None}
                for f in self.factors
            ],
            "noise_std": self.noise_std,
            "frames": dict(self.frames),
            "transforms": {
                name: {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in vars(m).items() if v is not None}
                for name, m in self.transforms.items()
            },
            "splits": list(self.splits),
            "group_size": self.group_size,
            "pianoroll_from": self.pianoroll_from,
            "pianoroll_frames": self.pianoroll_frames,
            "base_pitch": self.base_pitch,
            "seed": self.seed,
        }
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "FactorWorldSpec":
        known = {"n_items", "dims", "factors", "noise_std", "frames",
                 "transforms", "splits", "group_size", "pianoroll_from",
                 "pianoroll_frames", "base_pitch", "seed"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown world spec keys {sorted(unknown)}")
        factors = tuple(FactorSpec(**f) for f in obj.get("factors", []))
        transforms = {}
        for name, m in obj.get("transforms", {}).items():
            m = dict(m)
            for key in ("params_norm", "direction"):
                if m.get(key) is not None:
                    m[key] = tuple(m[key])
            transforms[name] = TransformModel(**m)
        return cls(
            n_items=int(obj["n_items"]),
            dims=dict(obj["dims"]),
            factors=factors,
            noise_std=float(obj.get("noise_std", 0.0)),
            frames=dict(obj.get("frames", {})),
            transforms=transforms,
            splits=tuple(obj.get("splits", (0.6, 0.2, 0.2))),
            group_size=int(obj.get("group_size", 1)),
            pianoroll_from=obj.get("pianoroll_from"),
            pianoroll_frames=obj.get("pianoroll_frames"),
            base_pitch=int(obj.get("base_pitch", 60)),
            seed=int(obj.get("seed", 0)),
        )


def _stream_layout(spec: FactorWorldSpec):
    """Block layout per stream: (factor, role, offset, width) tuples."""
    layout = {stream: [] for stream in dm.STREAMS}
    for stream in dm.STREAMS:
        offset = 0
        for f in spec.factors:
            if f.stream == stream and f.own_gain > 0:
                layout[stream].append((f, "own", offset, f.width()))
                offset += f.width()
        for f in spec.factors:
            if f.stream != stream and f.leak_gain > 0:
                layout[stream].append((f, "leak", offset, f.width()))
                offset += f.width()
    return layout


def _encode(f: FactorSpec, value) -> np.ndarray:
    return _encode_many(f, np.asarray([value]))[0]


def _encode_many(f: FactorSpec, values: np.ndarray) -> np.ndarray:
    """Unscaled encodings for a vector of factor values, shape (n, width)."""
    if f.kind == "continuous":
        span = f.hi - f.lo
        return (2.0 * (values - f.lo) / span - 1.0)[:, None]
    if f.encoding == "scalar":
        if f.k == 1:
            return np.zeros((len(values), 1))
        return (-1.0 + 2.0 * values / (f.k - 1))[:, None]
    return np.eye(f.k)[values.astype(np.int64)]


def _content_matrix(spec: FactorWorldSpec, values: dict, stream: str,
                    n: int) -> np.ndarray:
    """Noise-free content for one stream, shape (n, D)."""
    layout = _stream_layout(spec)
    mat = np.zeros((n, spec.dims[stream]))
    for f, role, offset, width in layout[stream]:
        gain = f.own_gain if role == "own" else f.leak_gain
        mat[:, offset:offset + width] = gain * _encode_many(f, values[f.name])
    return mat


def _content_vectors(spec: FactorWorldSpec, values: dict) -> dict:
    return {stream: _content_matrix(spec, values, stream, spec.n_items)
            for stream in dm.STREAMS}


def _sample_factors(spec: FactorWorldSpec, rng: Rng) -> dict:
    values = {}
    for f in spec.factors:
        sub = rng.child(f"factor:{f.name}")
        if f.kind == "categorical":
            values[f.name] = sub.integers(0, f.k, spec.n_items)
        else:
            values[f.name] = sub.uniform(f.lo, f.hi, spec.n_items)
    return values


def _transform_operator(spec: FactorWorldSpec, name: str, rng: Rng):
    """Returns apply(Z, p, item_rng) for one transform model.

    Z is (rows, D); p is a scalar (applied to every row) or a (rows,) vector.
    """
    model = spec.transforms[name]
    d = spec.dims[model.stream]
    sub = rng.child(f"model:{name}")

    def _p_col(p):
        p = np.asarray(p, dtype=np.float64)
        return p[:, None] if p.ndim == 1 else p

    if model.kind == "additive":
        if model.direction is not None:
            u = np.asarray(model.direction, dtype=np.float64)
            if u.shape != (d,):
                raise ConfigError(f"transform '{name}': direction must have dim {d}")
        else:
            u = sub.normal(d)
        u = u / np.linalg.norm(u)
        return lambda z, p, item_rng: z + _p_col(p) * u
    if model.kind == "linear":
        a = np.linalg.qr(sub.normal((d, d)))[0]
        b = sub.normal(d)
        b = b / np.linalg.norm(b)
        return lambda z, p, item_rng: z @ a.T + _p_col(p) * b
    scale = model.noise_scale
    return lambda z, p, item_rng: item_rng.normal(z.shape, scale)


def _split_counts(spec: FactorWorldSpec):
    n = spec.n_items
    n_val = max(1, int(round(spec.splits[1] * n)))
    n_test = max(1, int(round(spec.splits[2] * n)))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ConfigError("split fractions leave no training items")
    return n_train, n_val, n_test


def generate_world(spec: FactorWorldSpec, out_dir) -> dm.DatasetManifest:
    """Materialize a world to disk and return the validated manifest.

    Deterministic per seed: regenerating yields byte-identical files.
    """
    spec.validate()
    out_dir = Path(out_dir)
    rng = Rng(spec.seed)

    values = _sample_factors(spec, rng)
    content = _content_vectors(spec, values)

    n = spec.n_items
    item_ids = [f"it{i:05d}" for i in range(n)]

    n_train, n_val, n_test = _split_counts(spec)
    perm = rng.child("splits").permutation(n)
    split_of = {}
    for j, i in enumerate(perm):
        split_of[item_ids[i]] = ("train" if j < n_train
                                 else "val" if j < n_train + n_val else "test")

    noise_rng = rng.child("noise")
    frames_data = {}
    for stream in dm.STREAMS:
        t = spec.stream_frames(stream)
        base = np.repeat(content[stream][:, None, :], t, axis=1)
        if spec.noise_std > 0:
            base = base + noise_rng.normal(base.shape, spec.noise_std)
        frames_data[stream] = base  # (n, T, D)

    rolls = {}
    if spec.pianoroll_from is not None:
        f = next(f for f in spec.factors if f.name == spec.pianoroll_from)
        t_lab = spec.pianoroll_frames or max(spec.stream_frames("structure"), 4)
        for i, item in enumerate(item_ids):
            roll = np.zeros((t_lab, dm.N_PITCHES), dtype=np.uint8)
            roll[:, spec.base_pitch + int(values[f.name][i])] = 1
            rolls[item] = roll

    def _labels(i):
        fields = {"group_id": f"trk{(i // spec.group_size):05d}"}
        for f in spec.factors:
            if f.kind == "categorical":
                fields[f.name] = int(values[f.name][i])
            else:
                fields[f.name] = float(values[f.name][i])
        return dm.LabelSet(**fields)

    records = []
    tensors = {}  # rel path -> array
    roll_paths = {}
    for i, item in enumerate(item_ids):
        paths = {}
        for stream in dm.STREAMS:
            rel = f"tensors/{item}.{stream}.npy"
            tensors[rel] = frames_data[stream][i]
            paths[stream] = rel
        roll_path = None
        if item in rolls:
            roll_path = f"rolls/{item}.npy"
            roll_paths[roll_path] = rolls[item]
        records.append(dm.ManifestRecord(
            item_id=item,
            split=split_of[item],
            tensor_paths=paths,
            labels=_labels(i),
            view=dm.ViewMeta(base_item_id=item),
            pianoroll_path=roll_path,
        ))

    param_norm = {}
    for name in sorted(spec.transforms):
        model = spec.transforms[name]
        param_norm[name] = dm.ParamScaling(scale=model.raw_scale,
                                           offset=model.raw_offset)
        operator = _transform_operator(spec, name, rng)
        p_rng = rng.child(f"params:{name}")
        t_rng = rng.child(f"noise:{name}")
        for i, item in enumerate(item_ids):
            for v in range(model.views_per_item):
                if model.params_norm is not None:
                    choices = model.params_norm
                    norm = float(choices[p_rng.integers(0, len(choices))])
                else:
                    norm = float(p_rng.uniform(-1.0, 1.0))
                raw = param_norm[name].denormalize(norm)
                view_id = f"{item}.{name}.{v}"
                paths = {}
                for stream in dm.STREAMS:
                    rel = f"tensors/{view_id}.{stream}.npy"
                    if stream == model.stream:
                        tensors[rel] = operator(frames_data[stream][i], norm, t_rng)
                    else:
                        tensors[rel] = frames_data[stream][i]
                    paths[stream] = rel
                base_rec = records[i]
                records.append(dm.ManifestRecord(
                    item_id=view_id,
                    split=base_rec.split,
                    tensor_paths=paths,
                    labels=base_rec.labels,
                    view=dm.ViewMeta(base_item_id=item, transform=name,
                                     param_raw=raw, param_norm=norm),
                    pianoroll_path=base_rec.pianoroll_path,
                ))

    header_labels = {}
    for f in spec.factors:
        if f.name == "instrument_id":
            header_labels["instrument_classes"] = f.k
    header = dm.ManifestHeader(
        streams={s: dm.StreamInfo(dim=spec.dims[s], frames=spec.stream_frames(s))
                 for s in dm.STREAMS},
        param_norm=param_norm,
        labels=header_labels,
    )

    records.sort(key=lambda r: r.item_id)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rel, arr in tensors.items():
        dm.write_embedding(out_dir / rel, arr)
    for rel, roll in roll_paths.items():
        dm.write_pianoroll(out_dir / rel, roll)

    manifest_path = out_dir / "manifest.jsonl"
    lines = [dm.canonical_json(header.to_obj())]
    lines.extend(dm.canonical_json(rec.to_obj()) for rec in records)
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    sidecar = out_dir / "world_spec.json"
    sidecar.write_text(dm.canonical_json(spec.to_obj()) + "\n", encoding="utf-8")

    return dm.load_manifest(manifest_path)


@dataclass(frozen=True)
class OracleResult:
    value: float
    stderr: float = 0.0


def _factor_means(spec, f: FactorSpec, gain: float) -> np.ndarray:
    return np.stack([gain * _encode(f, c) for c in range(f.k)])


def world_oracle(spec: FactorWorldSpec, query: str, **kwargs) -> OracleResult:
    """Ground-truth answers from the generative model.

    bayes_accuracy(factor, stream=assigned): best achievable accuracy for a
    categorical factor read from one stream. expected_invariance(stream,
    transform): expected cosine between clean and transformed pooled
    embeddings. Closed form where exact, Monte-Carlo (10^5 samples, with
    standard error) otherwise.
    """
    spec.validate()
    if query == "bayes_accuracy":
        name = kwargs["factor"]
        f = next((f for f in spec.factors if f.name == name), None)
        if f is None or f.kind != "categorical":
            raise UnsupportedQueryError(f"no categorical factor '{name}'")
        stream = kwargs.get("stream", f.stream)
        gain = f.own_gain if stream == f.stream else f.leak_gain
        if gain == 0.0:
            return OracleResult(value=1.0 / f.k)
        sigma = spec.noise_std / np.sqrt(spec.stream_frames(stream))
        if sigma == 0.0:
            return OracleResult(value=1.0)
        means = _factor_means(spec, f, gain)  # (k, width)
        rng = Rng(spec.seed).child("oracle:bayes")
        classes = rng.integers(0, f.k, MC_SAMPLES)
        x = means[classes] + rng.normal((MC_SAMPLES, means.shape[1]), sigma)
        # equal priors, isotropic noise: maximum-likelihood = nearest mean
        d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        correct = (d2.argmin(axis=1) == classes)
        acc = float(correct.mean())
        stderr = float(np.sqrt(acc * (1.0 - acc) / MC_SAMPLES))
        return OracleResult(value=acc, stderr=stderr)

    if query == "expected_invariance":
        stream = kwargs["stream"]
        name = kwargs["transform"]
        if name not in spec.transforms:
            raise UnsupportedQueryError(f"world has no transform '{name}'")
        model = spec.transforms[name]
        if model.stream != stream:
            return OracleResult(value=1.0)  # untouched stream: identical tensors
        rng = Rng(spec.seed).child("oracle:invariance")
        n_mc = MC_SAMPLES
        values = _sample_mc_factors(spec, rng, n_mc)
        content = _content_matrix(spec, values, stream, n_mc)
        t = spec.stream_frames(stream)
        pooled = content
        if spec.noise_std > 0:
            pooled = pooled + rng.normal(content.shape,
                                         spec.noise_std / np.sqrt(t))
        operator = _transform_operator(spec, name, Rng(spec.seed))
        if model.params_norm is not None:
            choices = np.asarray(model.params_norm, dtype=np.float64)
            params = choices[rng.integers(0, len(choices), n_mc)]
        else:
            params = rng.uniform(-1.0, 1.0, n_mc)
        transformed = operator(pooled, params, rng.child("fresh"))
        nz = np.linalg.norm(pooled, axis=1)
        nt = np.linalg.norm(transformed, axis=1)
        valid = (nz > 0) & (nt > 0)
        if not valid.any():
            raise UnsupportedQueryError("all embeddings have zero norm")
        sims = np.sum(pooled[valid] * transformed[valid], axis=1)
        sims /= nz[valid] * nt[valid]
        return OracleResult(value=float(sims.mean()),
                            stderr=float(sims.std(ddof=1) / np.sqrt(sims.size)))

    raise UnsupportedQueryError(f"unknown oracle query '{query}'")


def _sample_mc_factors(spec, rng: Rng, n: int) -> dict:
    values = {}
    for f in spec.factors:
        sub = rng.child(f"factor:{f.name}")
        if f.kind == "categorical":
            values[f.name] = sub.integers(0, f.k, n)
        else:
            values[f.name] = sub.uniform(f.lo, f.hi, n)
    return values


def load_world_spec(path) -> FactorWorldSpec:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return FactorWorldSpec.from_obj(obj)
