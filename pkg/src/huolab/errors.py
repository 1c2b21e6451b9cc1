"""Exception hierarchy shared by every huolab module."""


class HuoLabError(Exception):
    """Base class for all errors raised by huolab."""


class ValidationError(HuoLabError, ValueError):
    """Inputs violate a documented precondition (shapes, ranges, names)."""


class ResourceError(HuoLabError):
    """Requested problem size exceeds the configured dense-storage cap."""


class NumericError(HuoLabError, ArithmeticError):
    """A numerical kernel failed (eigensolver non-convergence, log of a non-positive number)."""


class UnsupportedDimensionError(HuoLabError, ValueError):
    """No complete family of mutually unbiased bases is constructed for this dimension."""


class NotUnbiasedError(HuoLabError, ValueError):
    """A basis expected to be unbiased to a reference basis is not."""


class PreconditionError(HuoLabError, ValueError):
    """An operation-specific precondition (eigenstate, unbiased pair, HUO) does not hold."""


class ConvergenceError(HuoLabError):
    """An iterative solver stopped before meeting its tolerances.

    ``best`` carries whatever the solver had at the end (state, residuals).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(HuoLabError):
    """One or more problems in an experiment configuration.

    All problems found are collected in ``problems`` rather than stopping at the first.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SchemaError(HuoLabError):
    """CSV columns of a run output do not match the golden reference."""


class StageError(HuoLabError):
    """An experiment stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
