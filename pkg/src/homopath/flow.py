"""ODE path followers and the time-reparametrization bridge.

Three autonomous flows share one adaptive integrator:

  * the exact-inverse flow   x' = -[F'(x)]^{-1} F(x0)   on [0, 1],
  * the generalized flow     x' = M(x) F(x0)            on [0, 1],
  * the residual-decay flow  z' = -[F'(z)]^{-1} F(z)    on [0, T].

The first two drive the residual linearly: F(x(t)) = (1 - t) F(x0) holds
exactly for the exact inverse and up to kappa*t*||F(x0)|| in general.
The third decays the residual exponentially, F(z(t)) = e^{-t} F(x0), and
is the first flow run through the time change w(t) = 1 - e^{-t}.

The integrator is a Dormand-Prince 5(4) embedded pair with error-per-step
acceptance. Checkpoints are integration nodes (steps are clamped at
checkpoint boundaries), so recorded states carry no interpolation error;
cubic Hermite dense output serves off-node queries only.
"""

from __future__ import annotations

import bisect
import dataclasses
import math
from typing import Callable, Optional, Sequence

import numpy as np

from ._linalg import solve_checked
from .calculus import jacobian
from .errors import (
    BallExitError,
    DimensionMismatchError,
    EvaluationError,
    MaxStepsExceededError,
    StepUnderflowError,
)
from .model import Problem, homotopy_defect
from .operators import InverseOperator, exact_newton
from .spectral import KappaEstimate

# Dormand-Prince 5(4) tableau. Rows of _A are the stage weights; _B5 is the
# fifth-order propagating solution; _E = b5 - b4 gives the error estimate.
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
       11.0 / 84.0, 0.0)
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
      -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_BALL_SLACK = 1e-12

FLOW_DAVIDENKO = "davidenko"
FLOW_GENERALIZED = "generalized"
FLOW_CONTINUOUS_NEWTON = "continuous-newton"


@dataclasses.dataclass(frozen=True)
class IntegratorConfig:
    """Step-control knobs shared by all followers."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    initial_step: float = 1e-2
    max_steps: int = 10000
    checkpoint_count: int = 33

    def __post_init__(self):
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if not (self.initial_step > 0.0):
            raise ValueError("initial step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.checkpoint_count < 2:
            raise ValueError("need at least 2 checkpoints")


@dataclasses.dataclass(frozen=True)
class IntegratorStats:
    """Accepted steps, rejected attempts, and the worst accepted scaled error."""

    steps: int
    rejections: int
    max_error_estimate: float


@dataclasses.dataclass(frozen=True)
class TracePoint:
    """One checkpoint: state, residual, and the certified defect/bound pair."""

    t: float
    x: np.ndarray
    residual: np.ndarray
    defect: float
    bound: float
    outside_ball: bool


@dataclasses.dataclass(frozen=True)
class PathTrace:
    """An immutable followed path sampled at checkpoints.

    knots hold (t, x, x') at every accepted integration node and feed the
    cubic Hermite dense output; checkpoints are themselves nodes, so the
    points carry pure integration error.
    """

    problem_name: str
    flow: str
    points: tuple
    kappa_used: KappaEstimate
    stats: IntegratorStats
    knots: tuple = dataclasses.field(repr=False, default=())

    @property
    def terminal(self) -> np.ndarray:
        return self.points[-1].x

    @property
    def exited_ball(self) -> bool:
        return any(p.outside_ball for p in self.points)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    def max_defect(self) -> float:
        return max(p.defect for p in self.points)

    def interpolate(self, t: float) -> np.ndarray:
        """Dense output: cubic Hermite between the accepted nodes bracketing t."""
        t = float(t)
        knot_times = [k[0] for k in self.knots]
        lo, hi = knot_times[0], knot_times[-1]
        if t < lo - 1e-12 or t > hi + 1e-12:
            raise ValueError(f"time {t} outside followed range [{lo}, {hi}]")
        t = min(max(t, lo), hi)
        idx = bisect.bisect_right(knot_times, t)
        if idx >= len(knot_times):
            return self.knots[-1][1].copy()
        if idx == 0 or knot_times[idx - 1] == t:
            return self.knots[max(idx - 1, 0)][1].copy()
        t0, x0, f0 = self.knots[idx - 1]
        t1, x1, f1 = self.knots[idx]
        h = t1 - t0
        s = (t - t0) / h
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1


def _error_norm(ev: np.ndarray, x_old: np.ndarray, x_new: np.ndarray,
                cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x_old), np.abs(x_new))
    return float(np.sqrt(np.mean((ev / scale) ** 2)))


def _integrate(
    field: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    grid: np.ndarray,
    cfg: IntegratorConfig,
    on_accept: Optional[Callable[[float, np.ndarray], None]] = None,
):
    """Integrate an autonomous field, landing exactly on every grid time.

    Returns (states at grid times, accepted-node knots, stats). The step
    size is clamped so grid times are reached as integration nodes.
    """
    t = float(grid[0])
    x = np.array(x0, dtype=float)
    f = np.asarray(field(x), dtype=float)
    if not np.all(np.isfinite(f)):
        raise EvaluationError("vector field non-finite at start", x=x)
    knots = [(t, x.copy(), f.copy())]
    out = [x.copy()]
    h = cfg.initial_step
    steps = rejections = attempts = 0
    max_err = 0.0
    ks = [None] * 7
    for t_next in grid[1:]:
        t_next = float(t_next)
        while t < t_next:
            if t_next - t <= 1e-14 * max(1.0, abs(t_next)):
                t = t_next
                break
            clamped = h >= t_next - t
            h_try = t_next - t if clamped else h
            if h_try < 1e-15 * max(1.0, abs(t)):
                raise StepUnderflowError(
                    f"step size underflow at t={t:.12g}", t=t, x=x)
            attempts += 1
            if attempts > cfg.max_steps:
                raise MaxStepsExceededError(
                    f"exceeded {cfg.max_steps} step attempts at t={t:.12g}",
                    t=t, x=x)
            ks[0] = f
            for i in range(1, 7):
                xi = x + h_try * sum(
                    aij * ks[j] for j, aij in enumerate(_A[i]) if aij != 0.0)
                ks[i] = np.asarray(field(xi), dtype=float)
            x_new = x + h_try * sum(
                b * ks[j] for j, b in enumerate(_B5) if b != 0.0)
            if not np.all(np.isfinite(x_new)):
                raise EvaluationError(
                    "integration state became non-finite", x=x)
            ev = h_try * sum(e * ks[j] for j, e in enumerate(_E) if e != 0.0)
            err = _error_norm(ev, x, x_new, cfg)
            if err <= 1.0:
                t = t_next if clamped else t + h_try
                x = x_new
                f = ks[6]
                knots.append((t, x.copy(), f.copy()))
                steps += 1
                max_err = max(max_err, err)
                if on_accept is not None:
                    on_accept(t, x)
                factor = _MAX_FACTOR if err == 0.0 else min(
                    _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
                h = h_try * factor
            else:
                rejections += 1
                h = h_try * max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        out.append(x.copy())
    stats = IntegratorStats(steps=steps, rejections=rejections,
                            max_error_estimate=max_err)
    return out, knots, stats


def _checkpoint_grid(t_end: float, count: int) -> np.ndarray:
    return np.linspace(0.0, t_end, count)


def _homotopy_points(problem: Problem, grid, xs, kappa_hat: float):
    points = []
    for t, x in zip(grid, xs):
        d = homotopy_defect(problem, x, float(t), kappa_hat)
        outside = problem.distance_from_start(x) > problem.r + _BALL_SLACK
        points.append(TracePoint(
            t=float(t), x=x, residual=problem.evaluate(x),
            defect=d.defect, bound=d.bound, outside_ball=outside))
    return points


def _strict_ball_guard(problem: Problem):
    def guard(t: float, x: np.ndarray) -> None:
        if problem.distance_from_start(x) > problem.r + _BALL_SLACK:
            raise BallExitError(
                f"path left the trust ball at t={t:.12g}", t=t, x=x)
    return guard


def follow_generalized(
    problem: Problem,
    operator: InverseOperator,
    kappa: KappaEstimate,
    cfg: IntegratorConfig = IntegratorConfig(),
    strict_ball: bool = False,
) -> PathTrace:
    """Integrate x' = M(x) F(x0) over [0, 1].

    Checkpoints record the defect ||F(x(t)) - (1-t) F(x0)|| against the
    bound kappa_hat * t * ||F(x0)||. Leaving the trust ball flags the
    checkpoint (and the trace) by default; strict_ball aborts instead.
    """
    if operator.n != problem.n or operator.m != problem.m:
        raise DimensionMismatchError(
            f"operator is {operator.n}x{operator.m}, problem needs "
            f"{problem.n}x{problem.m}")
    grid = _checkpoint_grid(1.0, cfg.checkpoint_count)
    guard = _strict_ball_guard(problem) if strict_ball else None
    xs, knots, stats = _integrate(
        operator.field(problem), problem.x0, grid, cfg, on_accept=guard)
    return PathTrace(
        problem_name=problem.name,
        flow=FLOW_GENERALIZED,
        points=tuple(_homotopy_points(problem, grid, xs, kappa.kappa_hat)),
        kappa_used=kappa,
        stats=stats,
        knots=tuple(knots),
    )


def follow_davidenko(
    problem: Problem,
    cfg: IntegratorConfig = IntegratorConfig(),
    strict_ball: bool = False,
) -> PathTrace:
    """Integrate x' = -[F'(x)]^{-1} F(x0) over [0, 1].

    With the exact inverse the residual operator is -Id, kappa is exactly
    0, and the recorded bound column vanishes: the defect is pure
    integration error.
    """
    if problem.n != problem.m:
        raise DimensionMismatchError(
            f"exact-inverse flow needs a square system, got "
            f"n={problem.n}, m={problem.m}")
    kappa = KappaEstimate.closed_form(
        0.0, problem_name=problem.name, operator_name="exact-newton")
    trace = follow_generalized(
        problem, exact_newton(problem), kappa, cfg, strict_ball=strict_ball)
    return dataclasses.replace(trace, flow=FLOW_DAVIDENKO)


def follow_continuous_newton(
    problem: Problem,
    T: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> PathTrace:
    """Integrate z' = -[F'(z)]^{-1} F(z) over [0, T].

    The exact solution obeys F(z(t)) = e^{-t} F(x0); the defect column
    stores the law deviation | ||F(z(t))|| - e^{-t} ||F(x0)|| | and the
    bound column the integration budget 100 * abs_tol.
    """
    if problem.n != problem.m:
        raise DimensionMismatchError(
            f"residual-decay flow needs a square system, got "
            f"n={problem.n}, m={problem.m}")
    T = float(T)
    if T < 0.0:
        raise ValueError(f"horizon must be nonnegative, got {T}")
    kappa = KappaEstimate.closed_form(
        0.0, problem_name=problem.name, operator_name="exact-newton")

    def field(x: np.ndarray) -> np.ndarray:
        return -solve_checked(jacobian(problem, x), problem.evaluate(x), x=x)

    budget = 100.0 * cfg.abs_tol
    if T == 0.0:
        grid = np.array([0.0])
        xs = [problem.x0.copy()]
        knots = [(0.0, problem.x0.copy(), np.asarray(field(problem.x0)))]
        stats = IntegratorStats(steps=0, rejections=0, max_error_estimate=0.0)
    else:
        grid = _checkpoint_grid(T, cfg.checkpoint_count)
        xs, knots, stats = _integrate(field, problem.x0, grid, cfg)
    points = []
    for t, x in zip(grid, xs):
        res = problem.evaluate(x)
        deviation = abs(float(np.linalg.norm(res))
                        - math.exp(-float(t)) * problem.f0_norm)
        outside = problem.distance_from_start(x) > problem.r + _BALL_SLACK
        points.append(TracePoint(
            t=float(t), x=x, residual=res, defect=deviation,
            bound=budget, outside_ball=outside))
    return PathTrace(
        problem_name=problem.name,
        flow=FLOW_CONTINUOUS_NEWTON,
        points=tuple(points),
        kappa_used=kappa,
        stats=stats,
        knots=tuple(knots),
    )


def reparametrize_time(t: float, direction: str = "forward") -> float:
    """The time change w(t) = 1 - e^{-t} linking the two exact flows.

    forward maps decay time in [0, inf) to homotopy time in [0, 1);
    inverse maps back via ln(1/(1-t)). Both are evaluated through
    expm1/log1p so the roundtrip holds to near machine precision.
    """
    t = float(t)
    if direction == "forward":
        if t < 0.0:
            raise ValueError(f"forward time must be nonnegative, got {t}")
        return -math.expm1(-t)
    if direction == "inverse":
        if not (0.0 <= t < 1.0):
            raise ValueError(f"inverse time must lie in [0, 1), got {t}")
        return -math.log1p(-t)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def bridge_check(
    problem: Problem,
    T: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> float:
    """Max over checkpoints t in [0, T] of ||z(t) - x(w(t))||.

    z is the residual-decay flow, x the exact-inverse flow, and
    w(t) = 1 - e^{-t}; the two solve the same curve in different clocks,
    so the gap is pure numerics. The decay flow is read at its own
    checkpoints; the homotopy flow is read through dense output at the
    mapped times w(t), which are generally off-node.
    """
    T = float(T)
    if T < 0.0:
        raise ValueError(f"horizon must be nonnegative, got {T}")
    dav = follow_davidenko(problem, cfg)
    cn = follow_continuous_newton(problem, T, cfg)
    worst = 0.0
    for p in cn.points:
        w = reparametrize_time(p.t, "forward")
        gap = float(np.linalg.norm(p.x - dav.interpolate(w)))
        worst = max(worst, gap)
    return worst


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------

def trace_csv_header(n: int, m: int) -> str:
    xs = ",".join(f"x_{i + 1}" for i in range(n))
    fs = ",".join(f"F_{i + 1}" for i in range(m))
    return f"t,{xs},{fs},normF,defect,bound,exited_ball"


def format_trace_csv(points: Sequence[TracePoint], n: int, m: int) -> str:
    """Render checkpoint rows to CSV text with round-trip float formatting."""
    lines = [trace_csv_header(n, m)]
    for p in points:
        cells = [repr(float(p.t))]
        cells += [repr(float(v)) for v in p.x]
        cells += [repr(float(v)) for v in p.residual]
        cells.append(repr(float(np.linalg.norm(p.residual))))
        cells.append(repr(float(p.defect)))
        cells.append(repr(float(p.bound)))
        cells.append(str(int(p.outside_ball)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_trace_csv(path, points: Sequence[TracePoint], n: int, m: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trace_csv(points, n, m))
