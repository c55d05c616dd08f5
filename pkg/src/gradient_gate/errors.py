"""Exception hierarchy shared by all gradient-gate modules.

Every error derives from :class:`GradientGateError` and from the closest
builtin exception, so callers may catch either.
"""

from __future__ import annotations

from pathlib import Path


class GradientGateError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(GradientGateError, ValueError):
    """Two vectors (or parameter blocks) that must align have different shapes."""


class NonFiniteError(GradientGateError, ValueError):
    """A value that must be finite is NaN or infinite."""


class PartitionError(GradientGateError, ValueError):
    """A layer partition is missing, overlapping, or does not cover the vector."""


class SingularityError(GradientGateError, ValueError):
    """A field was evaluated at one of its declared singular points."""


class UnknownFieldError(GradientGateError, KeyError):
    """No builtin field exists under the requested name."""


class TerminalStateError(GradientGateError, RuntimeError):
    """An environment step was requested from a terminal state."""


class GenerationError(GradientGateError, RuntimeError):
    """Procedural generation gave up after its retry budget."""


class TeacherLookupError(GradientGateError, KeyError):
    """The teacher policy has no distribution for the requested state."""


class IdxFormatError(GradientGateError, ValueError):
    """An IDX file could not be parsed."""


class BadMagicError(IdxFormatError):
    """The IDX magic number does not match the expected file kind."""


class TruncatedFileError(IdxFormatError):
    """The IDX file ends before its header or payload is complete."""


class CountMismatchError(IdxFormatError):
    """Image and label files disagree on the number of items."""


class ConfigError(GradientGateError, ValueError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaMismatchError(GradientGateError, ValueError):
    """Records handed to a CSV writer do not match the declared schema."""


class OutputError(GradientGateError, OSError):
    """Writing an artifact failed."""

    def __init__(self, path: str | Path, reason: str):
        self.path = Path(path)
        super().__init__(f"{self.path}: {reason}")
