"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to, so the front end never has
to special-case module errors.
"""


class RydmagnonError(Exception):
    exit_code = 1


class ConfigError(RydmagnonError, ValueError):
    exit_code = 2


class ValidationError(RydmagnonError, ValueError):
    """Input violates a documented precondition (shape, hermiticity, range)."""

    exit_code = 2


class NumericalError(RydmagnonError, ArithmeticError):
    exit_code = 3


class CapacityError(NumericalError):
    """Requested Hilbert space is larger than the configured maximum."""


class ResonanceError(NumericalError):
    """A perturbative denominator vanishes (bare resonance or facilitation)."""

    def __init__(self, message, condition="resonance"):
        super().__init__(message)
        self.condition = condition


class CutoffError(NumericalError):
    """Truncation of an infinite problem is too small to be meaningful."""


class IntegrationError(NumericalError):
    pass


class EstimationError(RydmagnonError):
    exit_code = 4


class InconclusiveError(EstimationError):
    """Classification depends on the numerical cutoff."""
