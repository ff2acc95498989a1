"""Problem definitions: nonlinear maps, the built-in corpus, and inverse problems.

A problem is a map F: R^n -> R^m with a start point x0 and a trust radius r.
All certified statements are relative to the closed ball of radius r around
x0. The residual scale ||F(x0)|| is computed once and cached on the problem.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatchError, EvaluationError


def as_point(x, n: int) -> np.ndarray:
    """Coerce x to a float vector of length n."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != n:
        raise DimensionMismatchError(
            f"expected a point in R^{n}, got shape {np.shape(x)}"
        )
    return arr


@dataclasses.dataclass(frozen=True)
class Problem:
    """A nonlinear map F: R^n -> R^m with start point and trust ball.

    fun and jac receive and return numpy arrays: fun(x) -> (m,), and
    jac(x) -> (m, n). jac may be None, in which case callers fall back
    to finite differences.
    """

    name: str
    n: int
    m: int
    fun: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    r: float
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f0: np.ndarray = dataclasses.field(init=False, repr=False)
    f0_norm: float = dataclasses.field(init=False, repr=False)

    def __post_init__(self):
        x0 = as_point(self.x0, self.n)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "r", float(self.r))
        if not (self.r > 0.0) or not math.isfinite(self.r):
            raise ValueError(f"trust radius must be positive and finite, got {self.r}")
        f0 = self.evaluate(x0)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "f0_norm", float(np.linalg.norm(f0)))

    def evaluate(self, x) -> np.ndarray:
        """Evaluate F(x), guarding shape and finiteness."""
        x = as_point(x, self.n)
        try:
            val = np.atleast_1d(np.asarray(self.fun(x), dtype=float))
        except Exception as exc:  # surface callable failures as typed errors
            raise EvaluationError(f"map evaluation raised {exc!r}", x=x) from exc
        if val.ndim != 1 or val.shape[0] != self.m:
            raise DimensionMismatchError(
                f"map returned shape {val.shape}, expected ({self.m},)"
            )
        if not np.all(np.isfinite(val)):
            raise EvaluationError("map returned non-finite values", x=x)
        return val

    def in_ball(self, x, slack: float = 0.0) -> bool:
        """True when ||x - x0|| <= r + slack."""
        x = as_point(x, self.n)
        return float(np.linalg.norm(x - self.x0)) <= self.r + slack

    def distance_from_start(self, x) -> float:
        x = as_point(x, self.n)
        return float(np.linalg.norm(x - self.x0))


@dataclasses.dataclass(frozen=True)
class HomotopyDefect:
    """Deviation of a point from the straight-line residual schedule at time t.

    defect = ||F(x) - (1 - t) F(x0)||, to be compared against
    bound = kappa * t * ||F(x0)||.
    """

    t: float
    defect: float
    bound: float

    @property
    def satisfied(self) -> bool:
        return self.defect <= self.bound

    def margin(self) -> float:
        return self.bound - self.defect


def homotopy_defect(problem: Problem, x, t: float, kappa: float) -> HomotopyDefect:
    """Measure ||F(x) - (1-t) F(x0)|| against kappa * t * ||F(x0)||."""
    fx = problem.evaluate(x)
    target = (1.0 - t) * problem.f0
    defect = float(np.linalg.norm(fx - target))
    bound = kappa * t * problem.f0_norm
    return HomotopyDefect(t=float(t), defect=defect, bound=bound)


# ---------------------------------------------------------------------------
# Built-in corpus
# ---------------------------------------------------------------------------

def _quadratic() -> Problem:
    return Problem(
        name="quadratic",
        n=1, m=1,
        fun=lambda x: np.array([x[0] ** 2 - 2.0]),
        jac=lambda x: np.array([[2.0 * x[0]]]),
        x0=np.array([1.0]),
        r=0.5,
    )


def _exponential() -> Problem:
    return Problem(
        name="exponential",
        n=1, m=1,
        fun=lambda x: np.array([math.exp(x[0]) - 2.0]),
        jac=lambda x: np.array([[math.exp(x[0])]]),
        x0=np.array([0.0]),
        r=1.0,
    )


def _linear() -> Problem:
    return Problem(
        name="linear",
        n=1, m=1,
        fun=lambda x: np.array([x[0]]),
        jac=lambda x: np.array([[1.0]]),
        x0=np.array([1.0]),
        r=2.0,
    )


def _sumprod() -> Problem:
    # Coupled 2D system: component sums and products pinned to (3, 2).
    return Problem(
        name="sumprod",
        n=2, m=2,
        fun=lambda x: np.array([x[0] + x[1] - 3.0, x[0] * x[1] - 2.0]),
        jac=lambda x: np.array([[1.0, 1.0], [x[1], x[0]]]),
        x0=np.array([0.5, 0.5]),
        r=3.0,
    )


def _trap() -> Problem:
    # Cubic with a degenerate root at the origin; the Jacobian collapses there.
    return Problem(
        name="trap",
        n=1, m=1,
        fun=lambda x: np.array([x[0] ** 3]),
        jac=lambda x: np.array([[3.0 * x[0] ** 2]]),
        x0=np.array([0.5]),
        r=1.0,
    )


_CORPUS_BUILDERS = {
    "quadratic": _quadratic,
    "exponential": _exponential,
    "linear": _linear,
    "sumprod": _sumprod,
    "trap": _trap,
}


def corpus() -> dict:
    """Fresh instances of every built-in problem, keyed by name."""
    return {name: build() for name, build in _CORPUS_BUILDERS.items()}


def problem_names() -> list:
    return list(_CORPUS_BUILDERS)


def get_problem(name: str) -> Problem:
    try:
        return _CORPUS_BUILDERS[name]()
    except KeyError:
        known = ", ".join(_CORPUS_BUILDERS)
        raise KeyError(f"unknown problem {name!r}; known problems: {known}") from None


# ---------------------------------------------------------------------------
# Inverse problems: solve Psi(u) = g by rooting F(x) = Psi(x) - g from x0 = 0
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class InverseProblem:
    """Equation Psi(u) = g recast as the root problem F(x) = Psi(x) - g.

    The start point is the origin; psi must vanish there so that
    ||F(0)|| = ||g||, which ties the achievable residual directly to
    the data norm: ||Psi(u) - g|| <= kappa ||g||.
    """

    psi_name: str
    g: np.ndarray
    problem: Problem


def make_inverse_problem(
    psi: Callable[[np.ndarray], np.ndarray],
    g,
    n: int,
    m: int,
    r: float,
    psi_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    psi_name: str = "custom",
) -> InverseProblem:
    """Build the root problem F(x) = Psi(x) - g started at the origin."""
    g = as_point(g, m)
    zero = np.zeros(n)
    psi0 = np.atleast_1d(np.asarray(psi(zero), dtype=float))
    if psi0.shape != (m,):
        raise DimensionMismatchError(
            f"psi returned shape {psi0.shape} at the origin, expected ({m},)"
        )
    if float(np.linalg.norm(psi0)) > 1e-12:
        raise ValueError(
            "psi must vanish at the origin so the start residual equals ||g||"
        )
    problem = Problem(
        name=f"invert-{psi_name}",
        n=n, m=m,
        fun=lambda x: np.asarray(psi(x), dtype=float) - g,
        jac=psi_jac,
        x0=zero,
        r=r,
    )
    return InverseProblem(psi_name=psi_name, g=g, problem=problem)


def _psi_exp_minus_one():
    fun = lambda x: np.array([math.exp(x[0]) - 1.0])
    jac = lambda x: np.array([[math.exp(x[0])]])
    return fun, jac, 1, 1


def _psi_identity():
    fun = lambda x: np.array(x, dtype=float)
    jac = lambda x: np.eye(len(x))
    return fun, jac, 1, 1


_PSI_BUILDERS = {
    "exp-minus-one": _psi_exp_minus_one,
    "identity": _psi_identity,
}


def psi_names() -> list:
    return list(_PSI_BUILDERS)


def get_inverse_problem(psi_name: str, g, r: float) -> InverseProblem:
    """Inverse problem for a named Psi from the built-in registry."""
    try:
        fun, jac, n, m = _PSI_BUILDERS[psi_name]()
    except KeyError:
        known = ", ".join(_PSI_BUILDERS)
        raise KeyError(f"unknown psi {psi_name!r}; known: {known}") from None
    return make_inverse_problem(fun, g, n, m, r, psi_jac=jac, psi_name=psi_name)
