"""Approximate-inverse operators M(x) and a small parser for naming them.

An operator maps a point x to an (n, m) matrix M(x) meant to approximate
-[F'(x)]^{-1}. The quality of the approximation over the trust ball is
what the residual-operator norm kappa measures; the followers and the
path builder consume operators through this one interface.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

from ._linalg import invert_checked, solve_checked
from .calculus import jacobian
from .errors import DimensionMismatchError
from .model import Problem, as_point


@dataclasses.dataclass(frozen=True)
class InverseOperator:
    """A pluggable x -> M(x) map with a stable name for artifacts and CLI output."""

    name: str
    apply: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int

    def __call__(self, x) -> np.ndarray:
        x = as_point(x, self.n)
        mat = np.atleast_2d(np.asarray(self.apply(x), dtype=float))
        if mat.shape != (self.n, self.m):
            raise DimensionMismatchError(
                f"operator {self.name!r} returned shape {mat.shape}, "
                f"expected ({self.n}, {self.m})"
            )
        return mat

    def field(self, problem: Problem) -> Callable[[np.ndarray], np.ndarray]:
        """The autonomous drift x -> M(x) F(x0) used by path followers."""
        f0 = problem.f0

        def drift(x: np.ndarray) -> np.ndarray:
            return self(x) @ f0

        return drift


def exact_newton(problem: Problem) -> InverseOperator:
    """M(x) = -[F'(x)]^{-1}, the operator that zeroes the residual mismatch."""
    if problem.n != problem.m:
        raise DimensionMismatchError(
            f"exact inverse needs a square system, got n={problem.n}, m={problem.m}"
        )

    def apply(x: np.ndarray) -> np.ndarray:
        return -invert_checked(jacobian(problem, x), x=x)

    return InverseOperator(name="exact-newton", apply=apply, n=problem.n, m=problem.m)


def frozen_jacobian(problem: Problem, value=None) -> InverseOperator:
    """A constant operator.

    value=None freezes -[F'(x0)]^{-1}. A scalar c gives the constant matrix
    c * I (useful for hand-built contraction examples); an array is used
    as-is after shape checking.
    """
    if value is None:
        if problem.n != problem.m:
            raise DimensionMismatchError(
                f"frozen inverse needs a square system, got n={problem.n}, m={problem.m}"
            )
        mat = -invert_checked(jacobian(problem, problem.x0), x=problem.x0)
        name = "frozen"
    elif np.isscalar(value):
        mat = float(value) * np.eye(problem.n, problem.m)
        name = f"frozen:{float(value):g}"
    else:
        mat = np.atleast_2d(np.asarray(value, dtype=float))
        if mat.shape != (problem.n, problem.m):
            raise DimensionMismatchError(
                f"frozen operator needs shape ({problem.n}, {problem.m}), got {mat.shape}"
            )
        name = "frozen:matrix"
    mat = mat.copy()
    mat.setflags(write=False)
    return InverseOperator(name=name, apply=lambda x: mat, n=problem.n, m=problem.m)


def diagonal(problem: Problem) -> InverseOperator:
    """M(x) with only the reciprocal Jacobian diagonal: -1/J_ii on the diagonal."""
    if problem.n != problem.m:
        raise DimensionMismatchError(
            f"diagonal inverse needs a square system, got n={problem.n}, m={problem.m}"
        )

    def apply(x: np.ndarray) -> np.ndarray:
        d = np.diag(jacobian(problem, x)).astype(float)
        from .errors import SingularJacobianError

        if np.any(np.abs(d) < 1e-12):
            raise SingularJacobianError(
                "jacobian diagonal has a near-zero entry", x=x
            )
        return np.diag(-1.0 / d)

    return InverseOperator(name="diagonal", apply=apply, n=problem.n, m=problem.m)


def damped(problem: Problem, lam: float = 1e-3) -> InverseOperator:
    """Regularized least-squares inverse M(x) = -(J^T J + lam I)^{-1} J^T."""
    lam = float(lam)
    if lam < 0.0:
        raise ValueError(f"damping must be nonnegative, got {lam}")

    def apply(x: np.ndarray) -> np.ndarray:
        jmat = jacobian(problem, x)
        gram = jmat.T @ jmat + lam * np.eye(problem.n)
        return -solve_checked(gram, jmat.T, x=x)

    return InverseOperator(name=f"damped:{lam:g}", apply=apply, n=problem.n, m=problem.m)


def custom(
    problem: Problem,
    apply: Callable[[np.ndarray], np.ndarray],
    name: str = "custom",
) -> InverseOperator:
    """Wrap a user-supplied x -> M(x) callable."""
    return InverseOperator(name=name, apply=apply, n=problem.n, m=problem.m)


def parse_operator_spec(spec: str, problem: Problem) -> InverseOperator:
    """Build an operator from a CLI-style string.

    Accepted forms: "exact-newton", "frozen", "frozen:<scalar>",
    "diagonal", "damped", "damped:<lambda>".
    """
    head, _, arg = spec.partition(":")
    head = head.strip().lower()
    arg = arg.strip()
    if head == "exact-newton":
        if arg:
            raise ValueError(f"exact-newton takes no argument, got {spec!r}")
        return exact_newton(problem)
    if head == "frozen":
        if not arg:
            return frozen_jacobian(problem)
        return frozen_jacobian(problem, value=float(arg))
    if head == "diagonal":
        if arg:
            raise ValueError(f"diagonal takes no argument, got {spec!r}")
        return diagonal(problem)
    if head == "damped":
        return damped(problem, lam=float(arg)) if arg else damped(problem)
    raise ValueError(
        f"unknown operator spec {spec!r}; expected exact-newton, frozen[:c], "
        f"diagonal, or damped[:lambda]"
    )
