"""Constructive piecewise-linear paths on dyadic partitions with per-step certificates.

At level k the interval [0, 1] is split at t_i = i/2^k. From each node the
candidate move is the Euler displacement s * h with h = M(y) F(x0), h
clipped to the trust radius so the interpolant stays r-Lipschitz. A move
is accepted when

    ||F(w) - F(y) + s F(x0)|| <= s * eps + s * kappa * ||F(x0)||

with eps = 1/k; a violating move is bisected in time and each half is
re-tested, recursively to depth 40. Partial sums telescope, so the nodal
inequality above survives bisection, and summing it over nodes gives the
cumulative certificate

    ||F(w_j) - (1 - t_j) F(x0)|| <= t_j * eps + kappa * t_j * ||F(x0)||.

Everything stored in the path is re-verifiable by plain re-evaluation.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .errors import StepAcceptanceError
from .flow import TracePoint
from .model import Problem
from .operators import InverseOperator
from .spectral import KappaEstimate

_EPS_FLOOR = 1e-12
_BISECT_DEPTH = 40
_SLACK = 1e-12
_MAX_LEVEL = 25


@dataclasses.dataclass(frozen=True)
class AcceptRecord:
    """Certificate for one coarse step: nodal lhs/rhs and the Euler sub-steps used."""

    index: int
    lhs: float
    rhs: float
    substep_count: int


@dataclasses.dataclass(frozen=True)
class PartitionPath:
    """A certified piecewise-linear path on the level-k dyadic partition."""

    problem_name: str
    operator_name: str
    level: int
    nodes: np.ndarray
    values: tuple
    steps: np.ndarray
    epsilon: float
    accept_records: tuple
    kappa_used: KappaEstimate
    uniform_distance_from_previous: Optional[float] = None

    def interpolate(self, t: float) -> np.ndarray:
        """Piecewise-linear interpolant x_k(t) through the nodal values."""
        t = float(t)
        if t < -_SLACK or t > 1.0 + _SLACK:
            raise ValueError(f"time {t} outside [0, 1]")
        t = min(max(t, 0.0), 1.0)
        pos = t * (2 ** self.level)
        i = min(int(pos), 2 ** self.level - 1)
        frac = pos - i
        return (1.0 - frac) * self.values[i] + frac * self.values[i + 1]


def build_path(
    problem: Problem,
    operator: InverseOperator,
    k: int,
    kappa: KappaEstimate,
) -> PartitionPath:
    """Build the level-k certified path for (problem, operator, kappa)."""
    if k < 1:
        raise ValueError(f"partition level must be at least 1, got {k}")
    if k > _MAX_LEVEL:
        raise ValueError(
            f"partition level {k} exceeds the practical cap {_MAX_LEVEL} "
            f"(2^k + 1 nodes)")
    eps = max(1.0 / k, _EPS_FLOOR)
    kap = kappa.kappa_hat
    f0 = problem.f0
    nf0 = problem.f0_norm
    r = problem.r
    count = 2 ** k
    nodes = np.arange(count + 1) / count

    def advance(y: np.ndarray, s: float, index: int, depth: int):
        """One certified move of duration s from y; bisects on violation."""
        h = operator(y) @ f0
        hnorm = float(np.linalg.norm(h))
        if hnorm > r:
            h = h * (r / hnorm)
        w = y + s * h
        lhs = float(np.linalg.norm(problem.evaluate(w) - problem.evaluate(y)
                                   + s * f0))
        rhs = s * eps + s * kap * nf0
        if lhs <= rhs:
            return w, 1
        if depth >= _BISECT_DEPTH:
            raise StepAcceptanceError(
                f"step {index} not acceptable after {depth} bisections "
                f"(lhs={lhs:.6g} > rhs={rhs:.6g})",
                index=index, y=y, lhs=lhs, rhs=rhs)
        mid, c1 = advance(y, 0.5 * s, index, depth + 1)
        end, c2 = advance(mid, 0.5 * s, index, depth + 1)
        return end, c1 + c2

    values = [problem.x0.copy()]
    records = []
    for i in range(1, count + 1):
        s = float(nodes[i] - nodes[i - 1])
        w, substeps = advance(values[-1], s, i, 0)
        lhs = float(np.linalg.norm(problem.evaluate(w)
                                   - problem.evaluate(values[-1]) + s * f0))
        rhs = s * eps + s * kap * nf0
        if lhs > rhs:
            # telescoping guarantees this inequality up to rounding; a
            # violation here means the certificate cannot be stored honestly
            raise StepAcceptanceError(
                f"nodal inequality failed after substepping at step {i}",
                index=i, y=values[-1], lhs=lhs, rhs=rhs)
        values.append(w)
        records.append(AcceptRecord(index=i, lhs=lhs, rhs=rhs,
                                    substep_count=substeps))
    return PartitionPath(
        problem_name=problem.name,
        operator_name=operator.name,
        level=k,
        nodes=nodes,
        values=tuple(values),
        steps=np.diff(nodes),
        epsilon=eps,
        accept_records=tuple(records),
        kappa_used=kappa,
    )


@dataclasses.dataclass(frozen=True)
class PathReport:
    """Re-verification of a partition path's three certificates.

    All violation fields are clamped at zero: 0 means the property holds
    with the stated slack, positive values measure the worst overshoot.
    """

    problem_name: str
    level: int
    max_step_violation: float
    cumulative_defects: tuple
    cumulative_bounds: tuple
    lipschitz_violation: float
    containment_violation: float

    @property
    def cumulative_ok(self) -> bool:
        return all(d <= b for d, b in
                   zip(self.cumulative_defects, self.cumulative_bounds))

    @property
    def lipschitz_ok(self) -> bool:
        return self.lipschitz_violation == 0.0

    @property
    def containment_ok(self) -> bool:
        return self.containment_violation == 0.0

    @property
    def passed(self) -> bool:
        return (self.max_step_violation == 0.0 and self.cumulative_ok
                and self.lipschitz_ok and self.containment_ok)


def verify_path(
    problem: Problem,
    path: PartitionPath,
    pairs: int = 100,
    seed: int = 0,
) -> PathReport:
    """Re-check a path's certificates by plain re-evaluation.

    Per-step and cumulative inequalities are recomputed from the stored
    nodes and values; the Lipschitz bound ||x(t) - x(s)|| <= r|t - s| is
    sampled on `pairs` random time pairs; containment checks
    ||w_i - x0|| <= r * t_i at every node. Slack of 1e-12 absorbs
    roundoff on the geometric checks.
    """
    eps = path.epsilon
    kap = path.kappa_used.kappa_hat
    f0 = problem.f0
    nf0 = problem.f0_norm
    r = problem.r
    fvals = [problem.evaluate(v) for v in path.values]

    step_violation = 0.0
    for i in range(1, len(path.values)):
        s = float(path.steps[i - 1])
        lhs = float(np.linalg.norm(fvals[i] - fvals[i - 1] + s * f0))
        rhs = s * eps + s * kap * nf0
        step_violation = max(step_violation, lhs - rhs)
    step_violation = max(0.0, step_violation)

    defects = []
    bounds = []
    for i, t in enumerate(path.nodes):
        t = float(t)
        defects.append(float(np.linalg.norm(fvals[i] - (1.0 - t) * f0)))
        bounds.append(t * eps + kap * t * nf0)

    rng = np.random.default_rng(seed)
    lip_violation = 0.0
    for _ in range(pairs):
        a, b = rng.random(2)
        gap = float(np.linalg.norm(path.interpolate(a) - path.interpolate(b)))
        lip_violation = max(lip_violation, gap - (r * abs(a - b) + _SLACK))
    lip_violation = max(0.0, lip_violation)

    cont_violation = 0.0
    for t, v in zip(path.nodes, path.values):
        dist = float(np.linalg.norm(v - problem.x0))
        cont_violation = max(cont_violation, dist - (r * float(t) + _SLACK))
    cont_violation = max(0.0, cont_violation)

    return PathReport(
        problem_name=problem.name,
        level=path.level,
        max_step_violation=step_violation,
        cumulative_defects=tuple(defects),
        cumulative_bounds=tuple(bounds),
        lipschitz_violation=lip_violation,
        containment_violation=cont_violation,
    )


def refine(
    problem: Problem,
    operator: InverseOperator,
    path: PartitionPath,
    kappa: KappaEstimate,
) -> PartitionPath:
    """Build the next dyadic level and record the uniform distance to `path`.

    Both interpolants are piecewise linear with kinks on the finer node
    set, so the max of their difference over [0, 1] is attained at a
    fine node and is computed exactly there.
    """
    new = build_path(problem, operator, path.level + 1, kappa)
    dist = 0.0
    for t, v in zip(new.nodes, new.values):
        dist = max(dist, float(np.linalg.norm(v - path.interpolate(float(t)))))
    return dataclasses.replace(new, uniform_distance_from_previous=dist)


def partition_trace_points(problem: Problem, path: PartitionPath) -> list:
    """Nodal rows in the trace schema: defect and bound are the cumulative
    certificate ||F(w_j) - (1-t_j)F(x0)|| <= t_j*eps + kappa*t_j*||F(x0)||."""
    kap = path.kappa_used.kappa_hat
    points = []
    for t, v in zip(path.nodes, path.values):
        t = float(t)
        res = problem.evaluate(v)
        defect = float(np.linalg.norm(res - (1.0 - t) * problem.f0))
        bound = t * path.epsilon + kap * t * problem.f0_norm
        outside = problem.distance_from_start(v) > problem.r + _SLACK
        points.append(TracePoint(t=t, x=v, residual=res, defect=defect,
                                 bound=bound, outside_ball=outside))
    return points


def acceptance_payload(path: PartitionPath) -> dict:
    """JSON-ready sidecar with the per-step acceptance certificates."""
    kappa = path.kappa_used
    return {
        "problem": path.problem_name,
        "operator": path.operator_name,
        "level": path.level,
        "epsilon": path.epsilon,
        "kappa": {
            "method": kappa.method,
            "kappa_hat": kappa.kappa_hat,
            "samples": kappa.samples,
            "skipped": kappa.skipped,
            "seed": kappa.seed,
        },
        "uniform_distance_from_previous": path.uniform_distance_from_previous,
        "records": [
            {
                "index": rec.index,
                "lhs": rec.lhs,
                "rhs": rec.rhs,
                "substep_count": rec.substep_count,
            }
            for rec in path.accept_records
        ],
    }
