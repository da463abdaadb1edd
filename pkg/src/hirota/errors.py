"""Exception hierarchy shared by all modules."""


class HirotaError(Exception):
    """Base class for library errors."""


class ConfigurationError(HirotaError, ValueError):
    """Inconsistent sizes, grids or parameters."""


class InvariantViolation(HirotaError, ValueError):
    """An input breaks a structural invariant (symmetry, mean-zero, ...)."""


class DomainError(HirotaError, ValueError):
    """A scalar argument lies outside the admissible range."""


class ResonanceError(HirotaError, ArithmeticError):
    """A denominator is numerically zero but cannot be certified as exact."""


class UnresolvedMuError(HirotaError):
    """No irrationality exponent is available for an irrational coupling."""


class BlowUpError(HirotaError, FloatingPointError):
    """A coefficient overflowed or became non-finite during time stepping."""

    def __init__(self, message, time=None, max_abs=None):
        super().__init__(message)
        self.time = time
        self.max_abs = max_abs


class DiagnosticError(HirotaError):
    """A post-processing routine was handed unusable data."""
