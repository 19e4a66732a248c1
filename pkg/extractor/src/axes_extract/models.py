"""Published configurations of the supported encoder families.

Per model: timbre embedding dim, structure embedding dim, and the structure
stream's temporal resolution (frames per segment). Extraction validates
checkpoint dims against this table.
"""

from dataclasses import dataclass

from .errors import CheckpointError


@dataclass(frozen=True)
class ModelConfig:
    timbre_dim: int
    structure_dim: int
    temporal_res: int


MODEL_TABLE = {
    "ss_vq_vae": ModelConfig(timbre_dim=1024, structure_dim=1024, temporal_res=9),
    "ts_dsae": ModelConfig(timbre_dim=16, structure_dim=16, temporal_res=63),
    "after": ModelConfig(timbre_dim=6, structure_dim=12, temporal_res=86),
}


def model_config(name: str) -> ModelConfig:
    try:
        return MODEL_TABLE[name]
    except KeyError:
        raise CheckpointError(
            f"unknown model '{name}' (supported: {sorted(MODEL_TABLE)})"
        ) from None
