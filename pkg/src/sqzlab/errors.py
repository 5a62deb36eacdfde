"""Exception types shared across the package.

The CLI maps these onto its exit-code contract, so raising the right
class matters more than the message text.
"""


class SqzError(Exception):
    """Base class for all package errors."""


class TraceParseError(SqzError):
    """A trace / manifest / scenario / result file could not be parsed."""


class GridMismatchError(SqzError):
    """Operation requires traces on a common frequency grid."""


class RangeError(SqzError):
    """Requested frequencies lie outside the available grid (no extrapolation)."""


class EmptyResultError(SqzError):
    """Every point of a result was flagged invalid."""


class ThresholdError(SqzError):
    """Pump parameter at or above oscillation threshold (x >= 1)."""


class InconsistencyError(SqzError):
    """Inputs admit no physical solution (e.g. no pump parameter in [0, 1))."""


class InsufficientDataError(SqzError):
    """Not enough points / power levels for the requested analysis."""


class NumericError(SqzError):
    """A numerical procedure failed (step underflow, overflow, ...)."""


class DegeneracyError(SqzError):
    """Normal equations singular; names the ill-constrained direction."""


class NonConvergenceError(SqzError):
    """Iterative procedure exhausted its budget without converging."""


class DegeneracyWarning(UserWarning):
    """Fit parameters nearly confounded (large normal-matrix condition number)."""
