"""Exception hierarchy shared by the library and the CLI."""


class SunnError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(SunnError, ValueError):
    exit_code = 2


class InvalidDimensionsError(ConfigError):
    pass


class InfeasibleConfigError(ConfigError):
    pass


class InputError(SunnError):
    exit_code = 3


class ShapeError(InputError, ValueError):
    pass


class InvalidInputError(InputError, ValueError):
    pass


class DecodeError(InputError):
    pass


class CurveInvalidError(InputError, ValueError):
    """Raised when a precision-recall curve cannot be defined (empty ground truth)."""


class NumericalFailure(SunnError, ArithmeticError):
    exit_code = 4
