"""Extraction adapter: audio corpora + encoder checkpoints to datasets."""

from .audio import read_audio, segment
from .encoders import load_encoder, make_reference_checkpoint
from .extract import ExtractorSpec, ExtractReport, extract
from .models import MODEL_TABLE, model_config
from .transforms import pitch_shift, time_stretch

__version__ = "0.1.0"
