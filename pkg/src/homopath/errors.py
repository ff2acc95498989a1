"""Typed failures shared across the library.

Every numerical failure mode raises a subclass of :class:`HomopathError`,
so callers can distinguish "the run is wrong" (these) from programming
errors (plain ``ValueError`` / ``TypeError`` for violated preconditions).
Non-finite values are never propagated silently.
"""

from __future__ import annotations


class HomopathError(Exception):
    """Base class for all homopath runtime failures."""


class DimensionMismatchError(HomopathError):
    """A vector or matrix has the wrong shape for the problem at hand."""


class EvaluationError(HomopathError):
    """A map returned NaN/Inf, or every sample point failed."""

    def __init__(self, message: str, x=None):
        super().__init__(message)
        self.x = x


class SingularJacobianError(HomopathError):
    """The Jacobian is singular or ill-conditioned (rcond below threshold)."""

    def __init__(self, message: str, t=None, x=None, rcond=None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.rcond = rcond


class MaxStepsExceededError(HomopathError):
    """The integrator ran out of its step budget before reaching the end time."""

    def __init__(self, message: str, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class StepUnderflowError(HomopathError):
    """Adaptive step control drove the step size below float resolution."""

    def __init__(self, message: str, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class BallExitError(HomopathError):
    """Strict-ball mode: the path left the trust ball."""

    def __init__(self, message: str, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class StepAcceptanceError(HomopathError):
    """Path construction could not certify a step even after full bisection."""

    def __init__(self, message: str, index=None, y=None, lhs=None, rhs=None):
        super().__init__(message)
        self.index = index
        self.y = y
        self.lhs = lhs
        self.rhs = rhs


class CertificationError(HomopathError):
    """A claimed bound failed its cross-check against computed evidence."""
