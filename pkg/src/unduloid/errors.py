"""Exception hierarchy shared by the numerical modules."""

from __future__ import annotations


class UnduloidError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(UnduloidError, ValueError):
    """An argument lies outside the domain of the function."""


class NumericalError(UnduloidError, ArithmeticError):
    """A numerical procedure failed to deliver a trustworthy result."""


class NonConvergenceError(NumericalError):
    """Quadrature did not reach the requested tolerance.

    The best available value and its error estimate are kept so callers
    can decide whether to accept them.
    """

    def __init__(self, message: str, value: float, error_estimate: float):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class BracketError(NumericalError):
    """A root-finding bracket does not contain a sign change."""


class StepUnderflowError(NumericalError, ValueError):
    """Finite-difference step too small for double precision."""


class StepToleranceError(NumericalError, ValueError):
    """Finite-difference step incompatible with the integrand tolerance."""


class NoisyFunctionError(NumericalError):
    """Richardson extrapolation diverged; the function is too noisy for the step."""


class GridTooCoarseError(UnduloidError, ValueError):
    """Spatial grid has fewer points than the discretisation requires."""


class EigenSolverError(NumericalError):
    """Dense symmetric eigensolve failed."""


class BranchLossError(NumericalError):
    """Eigenvalue continuation lost track of the followed eigenfunction."""

    def __init__(self, message: str, t: float, overlap: float):
        super().__init__(message)
        self.t = t
        self.overlap = overlap


class DegenerateCriticalPointError(NumericalError):
    """Second derivative of the volume vanishes at a critical point."""
