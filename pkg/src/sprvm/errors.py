"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: DataError -> 3, NumericError -> 4,
ImproperPriorError -> 5 (plain ValueError / usage problems -> 2).
"""


class SprvmError(Exception):
    """Base class for package-specific errors."""


class DataError(SprvmError):
    """Unreadable, malformed, or invalid input data."""


class NumericError(SprvmError):
    """A numerical routine failed or produced an invalid result."""


class FactorizationError(NumericError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, message, lam=None, xi=None, cond=None):
        super().__init__(message)
        self.lam = lam
        self.xi = xi
        self.cond = cond


class KernelOverflowError(NumericError):
    """A kernel evaluation overflowed the double range."""


class QuadratureError(NumericError):
    """Numerical quadrature failed to converge on a fixed interval."""


class ImproperPriorError(SprvmError):
    """The requested prior provably leads to an improper posterior."""
