"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class ParseError(EngineError):
    """Manifest file is syntactically malformed (carries a line number)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(EngineError):
    """Manifest content violates the dataset contract (names the item)."""

    def __init__(self, message, item_id=None):
        if item_id is not None:
            message = f"item '{item_id}': {message}"
        super().__init__(message)
        self.item_id = item_id


class MismatchError(EngineError):
    """Records that must belong together do not."""


class EmptyError(EngineError):
    """An operation requires data that is absent (no pairs, no results)."""


class MissingLabelError(EngineError):
    """A required label field is not present on the record."""


class ShapeError(EngineError):
    """Array shapes are incompatible with the operation."""


class DegenerateError(EngineError):
    """Data is degenerate for the requested fit (one class, empty split)."""


class NonFiniteError(EngineError):
    """A loss or parameter became NaN/Inf during training."""


class SingularError(EngineError):
    """Closed-form solve hit a singular system with no regularization."""


class LengthError(EngineError):
    """Paired sequences have different lengths."""


class ZeroVectorError(EngineError):
    """Cosine similarity is undefined for a (near-)zero vector."""


class ConfigError(EngineError):
    """Run or world configuration is invalid."""


class UnsupportedQueryError(EngineError):
    """The oracle cannot answer this query for the given world."""
