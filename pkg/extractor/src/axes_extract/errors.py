class ExtractError(Exception):
    """Base class for adapter errors."""


class CodecError(ExtractError):
    """Audio file could not be decoded."""


class CheckpointError(ExtractError):
    """Encoder checkpoint missing, malformed, or dims off the model table."""


class SidecarError(ExtractError):
    """Instrument-change CSV sidecar is malformed."""
