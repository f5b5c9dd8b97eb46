"""Exception types shared across the package."""


class StructnetError(Exception):
    """Base class for all package errors."""


class ShapeError(StructnetError, ValueError):
    """Operand shapes are incompatible."""


class ValidationError(StructnetError, ValueError):
    """An argument violates a documented precondition."""


class NumericError(StructnetError, ArithmeticError):
    """A numerical routine failed to converge or hit a singular pivot.

    ``info`` carries whatever the routine had when it gave up (a residual,
    the last estimate, the failing pivot index).
    """

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


class DivergenceError(StructnetError):
    """Training or iteration left the finite regime.

    Carries the epoch/iteration index and any partial record (a TrainLog or
    RecursionTrace) so callers can treat divergence as data.
    """

    def __init__(self, message, index=None, record=None):
        super().__init__(message)
        self.index = index
        self.record = record


class StaleCacheError(StructnetError, RuntimeError):
    """A forward cache was reused or paired with the wrong layer."""


class ConfigError(StructnetError, ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class CheckpointError(StructnetError, ValueError):
    """Checkpoint file is corrupt, truncated or of an unsupported version."""
