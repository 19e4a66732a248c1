"""Evaluation engine for paired timbre/structure embedding streams."""

from .axes import (
    AxisResult,
    TaskSpec,
    mig_score,
    run_disentanglement_delta,
    run_informativeness,
    run_invariance,
    run_mig,
    run_p_equivariance,
    run_r_equivariance,
)
from .datamodel import (
    DatasetManifest,
    EmbeddingRecord,
    LabelSet,
    ViewMeta,
    align_pianoroll,
    concat_streams,
    load_manifest,
    pair_views,
    pool_time,
    save_manifest,
)
from .metrics import metric_accuracy, metric_cosine, metric_f1_track, metric_mse
from .probes import (
    ProbeSpec,
    TrainedProbe,
    closed_form_ridge,
    load_probe,
    mlp_gradient_check,
    predict,
    save_probe,
    train_probe,
    tune_threshold,
)
from .report import emit_table
from .runner import RunConfig, run
from .synthworld import (
    FactorSpec,
    FactorWorldSpec,
    TransformModel,
    generate_world,
    world_oracle,
)

__version__ = "0.1.0"
