"""Derivatives: one-sided directional differences, Jacobians, and cross-checks."""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .model import Problem, as_point


def default_step(x: np.ndarray) -> float:
    """Forward-difference step scaled to the point: sqrt(eps) * max(1, ||x||)."""
    return math.sqrt(np.finfo(float).eps) * max(1.0, float(np.linalg.norm(x)))


def directional_derivative_fd(
    problem: Problem, x, h, step: Optional[float] = None
) -> np.ndarray:
    """One-sided difference (F(x + s h) - F(x)) / s along direction h."""
    x = as_point(x, problem.n)
    h = as_point(h, problem.n)
    s = default_step(x) if step is None else float(step)
    if s <= 0.0:
        raise ValueError(f"difference step must be positive, got {s}")
    return (problem.evaluate(x + s * h) - problem.evaluate(x)) / s


def jacobian_fd(problem: Problem, x, step: Optional[float] = None) -> np.ndarray:
    """Column-by-column one-sided difference Jacobian, shape (m, n)."""
    x = as_point(x, problem.n)
    s = default_step(x) if step is None else float(step)
    if s <= 0.0:
        raise ValueError(f"difference step must be positive, got {s}")
    fx = problem.evaluate(x)
    cols = np.empty((problem.m, problem.n))
    for j in range(problem.n):
        e = np.zeros(problem.n)
        e[j] = 1.0
        cols[:, j] = (problem.evaluate(x + s * e) - fx) / s
    return cols


def jacobian(problem: Problem, x) -> np.ndarray:
    """Analytic Jacobian when the problem carries one, finite differences otherwise."""
    x = as_point(x, problem.n)
    if problem.jac is not None:
        mat = np.atleast_2d(np.asarray(problem.jac(x), dtype=float))
        if mat.shape != (problem.m, problem.n):
            from .errors import DimensionMismatchError

            raise DimensionMismatchError(
                f"jacobian returned shape {mat.shape}, expected ({problem.m}, {problem.n})"
            )
        return mat
    return jacobian_fd(problem, x)


@dataclasses.dataclass(frozen=True)
class DerivativeReport:
    """Agreement between analytic and finite-difference Jacobians at sampled points."""

    problem_name: str
    points: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def check_derivative(
    problem: Problem,
    points: int = 20,
    seed: int = 0,
    tolerance: float = 1e-5,
) -> DerivativeReport:
    """Compare analytic and difference Jacobians at random in-ball points.

    Relative error per point is ||J_a - J_fd||_F / max(1, ||J_a||_F); the
    report carries the worst case over all sampled points.
    """
    if problem.jac is None:
        raise ValueError(f"problem {problem.name!r} has no analytic jacobian to check")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        direction = rng.standard_normal(problem.n)
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            direction = np.ones(problem.n)
            norm = math.sqrt(problem.n)
        radius = problem.r * rng.random() ** (1.0 / problem.n)
        x = problem.x0 + radius * direction / norm
        ja = jacobian(problem, x)
        jf = jacobian_fd(problem, x)
        rel = float(np.linalg.norm(ja - jf)) / max(1.0, float(np.linalg.norm(ja)))
        worst = max(worst, rel)
    return DerivativeReport(
        problem_name=problem.name,
        points=points,
        max_rel_error=worst,
        tolerance=tolerance,
    )
