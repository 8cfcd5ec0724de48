"""Exception types raised by the engine.

Every rejection of malformed input gets a named error class so callers
(and the CLI) can distinguish bad data from internal faults.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EngineError, ValueError):
    """An input array or value violates a documented precondition."""


class DomainError(EngineError, ValueError):
    """A scalar argument lies outside the mathematical domain of an operation."""


class ShapeError(EngineError, ValueError):
    """Array dimensions are inconsistent with each other."""


class NormalizationError(EngineError, ValueError):
    """A distance exceeds the configured normalization maximum."""


class InternalConsistencyError(EngineError, RuntimeError):
    """A derived quantity failed a self-check (e.g. covariance not PSD)."""


class UnfillableError(EngineError, ValueError):
    """A flow field has no valid pixels to propagate from."""


class ConfigError(EngineError, ValueError):
    """Configuration file is syntactically or semantically invalid."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")


class UnknownKeyError(ConfigError):
    """Configuration contains a key the schema does not define."""


class FlowFormatError(EngineError, ValueError):
    """Base class for malformed flow-field files."""


class FlowMagicError(FlowFormatError):
    """Flow file does not start with the expected magic bytes."""


class FlowVersionError(FlowFormatError):
    """Flow file declares an unsupported format version."""


class FlowTruncatedError(FlowFormatError):
    """Flow file payload is shorter than its header promises."""


class ImageFormatError(EngineError, ValueError):
    """Image file has an unsupported bit depth or color type."""


class IntegrityError(EngineError, ValueError):
    """Stored metadata disagrees with the bytes on disk."""


class DatasetError(EngineError, ValueError):
    """Dataset directory violates the expected layout (e.g. missing manifest)."""


class SinkError(EngineError, OSError):
    """Writing an output artifact failed."""
