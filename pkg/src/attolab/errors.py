"""Exception hierarchy shared by all attolab modules.

Errors fall into three families used by the CLI for exit codes:
validation failures (bad input, exit 2), numerical-accuracy gate
failures (exit 3), and everything else (exit 1).
"""


class AttolabError(Exception):
    """Base class for all package errors."""


class ValidationError(AttolabError):
    """A configuration or argument failed its precondition checks."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = list(fields) if fields else []


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class GridResolutionError(ValidationError):
    """Grid too coarse for the requested momentum / potential."""


class ModelError(ValidationError):
    """Potential model inconsistent with the requested solve."""


class RangeError(AttolabError):
    """Evaluation point outside a tabulated range (no extrapolation)."""


class AccuracyError(AttolabError):
    """A numerical-accuracy gate failed (quadrature, regrid, ...)."""


class QuadratureAccuracyError(AccuracyError):
    """Richardson check between quadrature orders did not converge."""


class RegridError(AccuracyError):
    """Polar/Cartesian regridding round-trip residual above tolerance."""


class BranchAmbiguityError(AccuracyError):
    """Phase-shift branch selection tied; a denser k-grid is required."""


class TruncationError(AccuracyError):
    """Partial-wave sum not converged at the requested cutoff."""

    def __init__(self, message, suggested_cutoff=None):
        super().__init__(message)
        self.suggested_cutoff = suggested_cutoff


class ConvergenceError(AccuracyError):
    """Iterative procedure failed to converge."""


class AsymptoticZoneError(AccuracyError):
    """Requested radii not in the asymptotic zone (fixed point diverged)."""


class StabilityError(AccuracyError):
    """Time step violates the propagation stability bound."""


class GridExhaustedError(AccuracyError):
    """Outgoing flux reached the box boundary."""

    def __init__(self, message, required_extent=None):
        super().__init__(message)
        self.required_extent = required_extent


class AmbiguityError(AccuracyError):
    """Observable undefined on this input (multimodal distribution)."""


class GridMismatchError(ValidationError):
    """Two spectra/fields are not on identical grids."""
