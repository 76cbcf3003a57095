"""Exception hierarchy for lowdim."""

from typing import Any, Optional


class LowdimError(Exception):
    """Base class for all lowdim errors."""


class ConfigurationError(LowdimError):
    """Invalid configuration, model specification or input data."""


class GraphParseError(ConfigurationError):
    """Malformed graph file."""

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class IntegrityError(LowdimError):
    """Missing or corrupt checkpoint or state directory."""


class NumericalError(LowdimError):
    """Base class for failures of a numerical routine."""


class EvaluationError(NumericalError):
    """Map evaluation produced non-finite values."""


class InversionError(NumericalError):
    """Monotone root finding could not bracket or converge."""


class MatrixError(NumericalError):
    """A matrix that must be symmetric positive definite is not."""


class DomainError(NumericalError):
    """A density was evaluated outside its parameter domain."""


class ProbeError(NumericalError):
    """A log-density returned a non-finite value at a probe point."""

    def __init__(self, message: str, probe_index: int) -> None:
        super().__init__(message)
        self.probe_index = probe_index


class EmbeddingError(LowdimError, ValueError):
    """Coordinates of an embedded map are inconsistent with its dimension."""


class SequencingError(LowdimError):
    """A sequential step was requested out of order."""


class AssimilationError(NumericalError):
    """A step of sequential assimilation failed.

    Attributes:
        step_index: Index of the step that failed.
        state: The smoother state holding every step fitted before the failure.
    """

    def __init__(
        self, message: str, step_index: int, state: Optional[Any] = None
    ) -> None:
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index
        self.state = state
