"""Exception types shared across the library."""


class TaidLabError(Exception):
    """Base class for all library errors."""


class InvalidInputError(TaidLabError, ValueError):
    """Raised when a numeric input violates a precondition (NaN/Inf, negative loss, ...)."""


class DimensionError(TaidLabError, ValueError):
    """Raised when array shapes are inconsistent."""


class InvalidParameterError(TaidLabError, ValueError):
    """Raised when a configuration value or hyperparameter is out of its domain."""


class InvalidKernelError(TaidLabError, ValueError):
    """Raised when a kernel Gram matrix is not symmetric positive definite."""


class TrainingDiverged(TaidLabError, RuntimeError):
    """Raised when a training loss becomes non-finite.

    Carries the step index at which divergence was detected and the records
    accumulated so far, so callers can persist partial results.
    """

    def __init__(self, step: int, records=None):
        super().__init__(f"non-finite objective at step {step}")
        self.step = step
        self.records = records if records is not None else []


class ConfigError(TaidLabError, ValueError):
    """Raised for malformed experiment config files (carries line/field context)."""
