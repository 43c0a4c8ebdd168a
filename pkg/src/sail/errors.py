"""Exception hierarchy shared by all sail modules."""

from __future__ import annotations


class SailError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SailError, ValueError):
    """An argument failed validation (wrong shape, non-finite, out of range)."""


class DegenerateInputError(InvalidInputError):
    """Input is degenerate for the requested operation.

    Examples: a constant vector passed to min-max or z-score
    normalization, or a zero vector passed to l2 normalization.
    """


class ConfigError(SailError):
    """A run configuration is malformed or internally inconsistent."""


class LogitParseError(ConfigError):
    """An external logits file violated the expected line grammar.

    Parameters
    ----------
    message : str
        Description of the violation.
    path : str, optional
        File being parsed.
    line : int, optional
        1-based line number of the offending record.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        location = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class NumericalFailureError(SailError):
    """A computation produced non-finite values.

    The adaptation step at which the failure occurred is kept on the
    ``step`` attribute when known.
    """

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class PretrainingError(NumericalFailureError):
    """Source pretraining diverged (loss became non-finite)."""
