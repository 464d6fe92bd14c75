"""Exception hierarchy for the sentinel toolkit.

Every operational failure raises a subclass of :class:`SentinelError` so
callers (CLI, service) can map library errors to exit codes / HTTP codes
in one place.
"""

from __future__ import annotations

__all__ = [
    "SentinelError",
    "InvalidSpan",
    "AllGaps",
    "LengthMismatch",
    "EmptyInput",
    "MalformedJson",
    "SchemaViolation",
    "FormatError",
    "ShortFile",
    "OutOfOrder",
    "IoError",
    "SeriesTooShort",
    "NonFiniteLoss",
    "ContextTooShort",
    "NegativeDistance",
    "TooFewExcesses",
    "DegenerateSample",
    "InsufficientSample",
    "ScoreSpaceMismatch",
    "SpecTooDense",
    "NoModel",
    "EmptyWindow",
    "NotFound",
    "VerdictConflict",
    "OutOfRange",
    "BindFailure",
    "ConfigInvalid",
]


class SentinelError(Exception):
    """Base class for all sentinel errors.

    ``code`` is a stable machine-readable identifier (the class name) used
    in CLI/HTTP error payloads.
    """

    @property
    def code(self) -> str:
        return type(self).__name__


# -- series / grid ----------------------------------------------------------

class InvalidSpan(SentinelError):
    """Span is empty, inverted, or not a whole number of intervals."""


class AllGaps(SentinelError):
    """Median imputation requested but the series has no observed values."""


class LengthMismatch(SentinelError):
    """Two sequences that must be the same length are not."""


class EmptyInput(SentinelError):
    """An operation that needs at least one element got none."""


# -- ingest -----------------------------------------------------------------

class MalformedJson(SentinelError):
    """Document is not valid JSON; carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SchemaViolation(SentinelError):
    """JSON parsed but does not match the envelope schema; carries the path."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


class FormatError(SentinelError):
    """Benchmark file does not use the expected delimiter / decimal mark."""


class ShortFile(SentinelError):
    """Benchmark file has fewer rows than the requested window."""


class OutOfOrder(SentinelError):
    """Append rejected: timestamp not strictly after the last committed one."""

    def __init__(self, message: str, timestamp=None):
        super().__init__(message)
        self.timestamp = timestamp


class IoError(SentinelError):
    """Underlying filesystem failure in the store."""


# -- forecasting ------------------------------------------------------------

class SeriesTooShort(SentinelError):
    """Training series shorter than the configured context length."""


class NonFiniteLoss(SentinelError):
    """Training loss became NaN/inf (diverged)."""


class ContextTooShort(SentinelError):
    """Prediction context shorter than the model's receptive field."""


# -- detection --------------------------------------------------------------

class NegativeDistance(SentinelError):
    """Confidence mapping called with a negative bound distance."""


# -- extreme value tail -----------------------------------------------------

class TooFewExcesses(SentinelError):
    """Fewer excesses over the threshold than the configured minimum."""


class DegenerateSample(SentinelError):
    """All excesses are identical; the tail model has no spread to fit."""


class InsufficientSample(SentinelError):
    """Sample too small for the initial threshold to leave enough excesses."""


class ScoreSpaceMismatch(SentinelError):
    """Classification attempted against a fit from a different score space."""


# -- pipeline / evaluation --------------------------------------------------

class SpecTooDense(SentinelError):
    """Injection spec would modify 10% or more of the series."""


class NoModel(SentinelError):
    """Inference requested but no trained model is available."""


class EmptyWindow(SentinelError):
    """Inference window contains no slots."""


# -- service ----------------------------------------------------------------

class NotFound(SentinelError):
    """Referenced record does not exist."""


class VerdictConflict(SentinelError):
    """Feedback contradicts an already-committed verdict."""


class OutOfRange(SentinelError):
    """Configuration value outside its permitted range."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


class BindFailure(SentinelError):
    """Service could not bind its listen address."""


class ConfigInvalid(SentinelError):
    """Service configuration rejected; carries the offending field path."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field
