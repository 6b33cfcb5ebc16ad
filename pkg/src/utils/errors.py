"""
Error taxonomy shared by every layer of the package.

The CLI maps these onto exit codes: configuration / data / checkpoint
problems exit with 2, numeric divergence exits with 3.
"""

from typing import Optional, Sequence


class ConfigError(ValueError):
    """Invalid configuration: dimension mismatch, bad range, unknown key, malformed line."""


class DomainError(ValueError):
    """A time argument outside the domain of a field or map (t <= 0, tau > t, s = 0)."""


class NumericError(FloatingPointError):
    """Non-finite value in inputs, gradients or propagated states."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss; carries the diagnostic dump location."""

    def __init__(
        self,
        message: str,
        iteration: int,
        batch_indices: Optional[Sequence[int]] = None,
        dump_path: Optional[str] = None,
    ):
        super().__init__(message)
        self.iteration = iteration
        self.batch_indices = list(batch_indices) if batch_indices is not None else []
        self.dump_path = dump_path


class DatasetParseError(ValueError):
    """Malformed dataset file. `line` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DatasetValidationError(ValueError):
    """A dataset record breaks a record invariant. `record` is the 0-based transition index."""

    def __init__(self, message: str, record: int):
        super().__init__(f"record {record}: {message}")
        self.record = record


class CheckpointError(ValueError):
    """Unreadable checkpoint: bad magic, truncated payload or format-version mismatch."""
