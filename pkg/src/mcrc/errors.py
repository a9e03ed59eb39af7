"""Exception hierarchy. CLI exit codes hang off these classes."""


class McrcError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ValidationError(McrcError, ValueError):
    """An argument or parameter set violates its documented constraints."""

    exit_code = 2


class DomainError(ValidationError):
    """A function was evaluated outside its mathematical domain."""


class ConfigError(ValidationError):
    """An experiment configuration document is malformed."""


class UndefinedMetricError(McrcError, ArithmeticError):
    """A metric is undefined for the given data (e.g. constant targets)."""

    exit_code = 4


class SurrogateError(McrcError, ArithmeticError):
    """The Gaussian-process surrogate could not be factorized."""

    exit_code = 4


class OptimizationError(McrcError, RuntimeError):
    """The optimization loop cannot make progress."""

    exit_code = 4


class ResourceCapError(McrcError, RuntimeError):
    """A particle simulation would exceed its configured cost budget."""

    exit_code = 3
