"""Exception hierarchy.

``ValidationError`` subclasses mean the request itself was bad (CLI exit
code 2); ``NumericError`` subclasses mean a computation could not deliver a
trustworthy answer (exit code 3).
"""


class ErgolabError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(ErgolabError, ValueError):
    pass


class NumericError(ErgolabError, RuntimeError):
    pass


class ParameterError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class UnsupportedDimensionError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class CriticalPointError(ValidationError):
    pass


class ScheduleInfeasibleError(ValidationError):
    pass


class DivergentSumError(ValidationError):
    pass


class NonMarkovBaseError(ValidationError):
    pass


class EnumerationBudgetError(ValidationError):
    pass


class ZeroNormError(ValidationError):
    pass


class ConfigError(ValidationError):
    """Malformed experiment configuration."""


class OrbitEscapeError(NumericError):
    pass


class NonConvergenceError(NumericError):
    pass


class InsufficientSamplesError(NumericError):
    pass


class FitFailureError(NumericError):
    pass


class IncompleteTailError(NumericError):
    pass


class BoundViolationError(NumericError):
    pass


class SkippedEvaluationError(NumericError):
    pass
