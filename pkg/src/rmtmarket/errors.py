"""Exception hierarchy shared by all modules."""


class RmtError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(RmtError, ValueError):
    """A caller-supplied parameter violates a precondition."""


class DataError(RmtError, ValueError):
    """Input data is malformed or inconsistent."""


class FormatError(DataError):
    """A file could not be parsed. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateSeriesError(DataError):
    """A return series has zero variance inside an epoch."""

    def __init__(self, message, asset=None, tau=None):
        super().__init__(message)
        self.asset = asset
        self.tau = tau


class NumericError(RmtError, ArithmeticError):
    """Linear algebra failed or a matrix is not positive definite."""


class DomainError(RmtError, ValueError):
    """An operation was asked for outside the regime where it is defined."""
