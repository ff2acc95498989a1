"""Residual-operator analysis: spectral norms and the contraction factor kappa.

The residual operator A(x) = F'(x) M(x) measures how far M is from the
exact inverse: A + Id vanishes identically when M(x) = -[F'(x)]^{-1}.
kappa is the supremum of ||A(x) + Id|| over the trust ball; every
certification bound in the library is linear in it.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from .calculus import jacobian
from .errors import HomopathError
from .model import Problem, as_point
from .operators import InverseOperator

_POWER_MAX_ITER = 500
_POWER_TOL = 1e-10
_SVD_DIM_LIMIT = 3

SAMPLED_BALL = "sampled_ball"
CLOSED_FORM = "closed_form"


def operator_norm(mat: np.ndarray) -> float:
    """Spectral norm. Exact SVD up to 3x3; power iteration on M^T M above that.

    The power iteration starts from the normalized all-ones vector and
    stops when successive Rayleigh estimates agree to 1e-10 or after 500
    rounds, whichever comes first.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    m, n = mat.shape
    if max(m, n) <= _SVD_DIM_LIMIT:
        return float(np.linalg.svd(mat, compute_uv=False)[0])
    gram = mat.T @ mat
    v = np.ones(n) / math.sqrt(n)
    est = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = gram @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        new_est = float(v @ (gram @ v))
        if abs(new_est - est) <= _POWER_TOL * max(1.0, abs(new_est)):
            est = new_est
            break
        est = new_est
    return math.sqrt(max(est, 0.0))


@dataclasses.dataclass(frozen=True)
class ResidualOperator:
    """The map x -> F'(x) M(x) for a fixed problem and operator."""

    problem: Problem
    operator: InverseOperator

    def matrix(self, x) -> np.ndarray:
        x = as_point(x, self.problem.n)
        return jacobian(self.problem, x) @ self.operator(x)

    def deviation_norm(self, x) -> float:
        """||A(x) + Id||, the pointwise distance of M from the exact inverse."""
        a = self.matrix(x)
        return operator_norm(a + np.eye(self.problem.m))


def residual_operator(problem: Problem, operator: InverseOperator) -> ResidualOperator:
    return ResidualOperator(problem=problem, operator=operator)


@dataclasses.dataclass(frozen=True)
class KappaEstimate:
    """An estimate of kappa over the trust ball, sampled or supplied exactly.

    Sampled estimates take the max of ||A(x) + Id|| over the center plus
    `samples` uniform ball draws, so kappa_hat never exceeds the true
    supremum. closed-form estimates carry a user-supplied exact value.
    """

    problem_name: str
    operator_name: str
    kappa_hat: float
    method: str
    samples: int = 0
    skipped: int = 0
    seed: Optional[int] = None
    argmax: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in (SAMPLED_BALL, CLOSED_FORM):
            raise ValueError(f"unknown kappa method {self.method!r}")
        if self.kappa_hat < 0.0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa_hat}")

    @classmethod
    def closed_form(
        cls, value: float, problem_name: str = "", operator_name: str = ""
    ) -> "KappaEstimate":
        return cls(
            problem_name=problem_name,
            operator_name=operator_name,
            kappa_hat=float(value),
            method=CLOSED_FORM,
        )

    @property
    def is_closed_form(self) -> bool:
        return self.method == CLOSED_FORM


def _ball_point(rng: np.random.Generator, center: np.ndarray, r: float) -> np.ndarray:
    """One uniform draw from the closed ball; draws are per-point so a
    prefix of the sample sequence is identical for any larger sample count."""
    n = center.shape[0]
    direction = rng.standard_normal(n)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        direction = np.ones(n)
        norm = math.sqrt(n)
    radius = r * rng.random() ** (1.0 / n)
    return center + radius * direction / norm


def estimate_kappa(
    problem: Problem,
    operator: InverseOperator,
    samples: int = 200,
    seed: int = 0,
) -> KappaEstimate:
    """Sample ||A(x) + Id|| over the trust ball and keep the max.

    The ball center is always evaluated (it does not count toward
    `samples`); the draws are uniform over the ball. Points where the
    Jacobian or the operator fails (singularities inside the ball) are
    skipped and counted rather than aborting the whole estimate.
    """
    if samples < 1:
        raise ValueError(f"need at least one sample, got {samples}")
    res_op = ResidualOperator(problem=problem, operator=operator)
    rng = np.random.default_rng(seed)
    best = -math.inf
    best_x = None
    skipped = 0
    try:
        val = res_op.deviation_norm(problem.x0)
        best, best_x = val, problem.x0.copy()
    except HomopathError:
        skipped += 1
    for _ in range(samples):
        x = _ball_point(rng, problem.x0, problem.r)
        try:
            val = res_op.deviation_norm(x)
        except HomopathError:
            skipped += 1
            continue
        if val > best:
            best, best_x = val, x
    if best_x is None:
        raise HomopathError(
            f"all kappa samples failed on problem {problem.name!r}"
        )
    return KappaEstimate(
        problem_name=problem.name,
        operator_name=operator.name,
        kappa_hat=float(best),
        method=SAMPLED_BALL,
        samples=samples,
        skipped=skipped,
        seed=seed,
        argmax=best_x,
    )


def check_against_closed_form(estimate: KappaEstimate, kappa_true: float) -> None:
    """Fail loudly when a sampled estimate exceeds a claimed exact kappa.

    Sampling can only under-estimate the supremum, so kappa_hat beating
    the closed form by more than roundoff means the closed form is wrong.
    """
    if estimate.kappa_hat > kappa_true + 1e-8:
        raise HomopathError(
            f"sampled kappa {estimate.kappa_hat:.12g} exceeds claimed exact "
            f"value {kappa_true:.12g} on problem {estimate.problem_name!r} "
            f"with operator {estimate.operator_name!r}"
        )
