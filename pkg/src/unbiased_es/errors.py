"""Exception types raised by the simulation library."""


class UESError(Exception):
    """Base class for library errors."""


class DomainError(UESError, ValueError):
    """An argument lies outside the domain where an expression is defined."""


class HistoryUnderflowError(UESError):
    """A history lookup fell outside the span covered by stored samples."""


class HorizonOverflowError(UESError, OverflowError):
    """A growing exponential would overflow double precision."""


class NumericalBlowupError(UESError, ArithmeticError):
    """An integrator produced a non-finite value."""


class SingularSystemError(UESError, ArithmeticError):
    """A tridiagonal solve hit a zero pivot."""


class InsufficientDataError(UESError):
    """Too few samples to fit the requested quantity."""


class ConfigError(UESError):
    """Malformed or invalid scenario configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
