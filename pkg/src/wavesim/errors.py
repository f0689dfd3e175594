"""Exception types raised across the package."""


class WavesimError(Exception):
    """Base class for all package errors."""


class DomainError(WavesimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonConvergence(WavesimError, RuntimeError):
    """Quadrature could not meet its tolerance within the panel budget."""


class ScanTooNarrow(WavesimError, RuntimeError):
    """A sup-bound scan ended where the scanned function is not yet negligible."""


class BudgetTooTight(WavesimError, RuntimeError):
    """A truncation plan would exceed the configured total-term cap."""


class BoundViolation(WavesimError, AssertionError):
    """A computed coefficient exceeds its theoretical decay bound."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class CacheMiss(WavesimError, LookupError):
    """A coefficient argument falls outside the cached range."""


class GridMismatch(WavesimError, ValueError):
    """Two sample paths live on different time grids."""


class NegativeDeficit(WavesimError, ArithmeticError):
    """Included coefficient energy exceeds R(0) by more than the tolerance."""


class AdmissibilityError(WavesimError, ValueError):
    """A (density, wavelet) pair fails one of the integrability conditions the error bounds need."""

    def __init__(self, message, failing=()):
        super().__init__(message)
        self.failing = tuple(failing)
