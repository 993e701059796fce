"""Exception hierarchy shared by the library and the command line."""


class TimeDDError(Exception):
    """Base class for every error raised by :mod:`timedd`."""


class ParameterError(TimeDDError, ValueError):
    """Problem data violates a documented invariant."""


class InvalidDimensionError(TimeDDError, ValueError):
    pass


class SymmetryError(TimeDDError, ValueError):
    pass


class UnsupportedSpectrumError(TimeDDError, ValueError):
    """Raised for negative eigenvalues, which the analysis does not cover."""


class BoundUndefinedError(TimeDDError, ValueError):
    pass


class NotApplicableError(TimeDDError, ValueError):
    """A formula was requested outside the hypotheses it was derived under."""


class InvalidInputError(TimeDDError, ValueError):
    pass


class FactorizationError(TimeDDError, ArithmeticError):
    """Banded LU hit an exactly zero pivot."""

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class TooFewIterationsError(TimeDDError, ValueError):
    pass


class MatrixFileError(TimeDDError, OSError):
    pass


class ConfigError(TimeDDError, ValueError):
    """Bad run configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
