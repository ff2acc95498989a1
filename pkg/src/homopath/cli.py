"""Command-line interface: run followers, builders, and solvers; persist artifacts.

Every run writes into an output directory: a trace CSV, a versioned JSON
summary, and (where the result is a curve) an SVG plot. Summaries carry a
pass/fail entry per certified inequality, each named with its slack. Runs
are deterministic: identical config and seed give byte-identical CSV and
JSON artifacts, so wall time is printed to the console but stored as null.

Exit codes: 0 all certifications passed, 1 numerical failure or a failed
certification (summary still written), 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
import time
from typing import Optional

import numpy as np

from . import builder as builder_mod
from . import driver as driver_mod
from .errors import HomopathError
from .flow import (
    FLOW_CONTINUOUS_NEWTON,
    IntegratorConfig,
    PathTrace,
    follow_continuous_newton,
    follow_davidenko,
    follow_generalized,
    trace_csv_header,
    write_trace_csv,
)
from .model import (
    Problem,
    corpus,
    get_inverse_problem,
    get_problem,
    psi_names,
)
from .operators import parse_operator_spec
from .spectral import (
    CLOSED_FORM,
    SAMPLED_BALL,
    KappaEstimate,
    check_against_closed_form,
    estimate_kappa,
)

SCHEMA_VERSION = 1
_SVG_HASHSALT = "homopath"

_RUN_COMMANDS = ("follow", "build-path", "restart", "invert", "kappa")

DEFAULTS = {
    "operator": "exact-newton",
    "flow": "homotopy",
    "horizon": 1.0,
    "kappa": "auto",
    "samples": 200,
    "seed": 0,
    "strict_ball": False,
    "abs_tol": 1e-10,
    "rel_tol": 1e-8,
    "initial_step": 1e-2,
    "max_steps": 10000,
    "checkpoints": 33,
    "level": 3,
    "max_iters": 10,
    "tol": 1e-8,
    "radius": 1.0,
    "refresh_operator": False,
}

_INT_KEYS = {"samples", "seed", "max_steps", "checkpoints", "level", "max_iters"}
_FLOAT_KEYS = {"horizon", "abs_tol", "rel_tol", "initial_step", "tol", "radius"}
_BOOL_KEYS = {"strict_ball", "refresh_operator"}


class _ConfigError(Exception):
    """Invalid configuration; maps to exit status 2."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one run (defaults <- config file <- flags)."""

    command: str
    problem_name: Optional[str]
    operator_spec: str
    kappa_method: str
    kappa_value: Optional[float]
    samples: int
    seed: int
    integrator: IntegratorConfig
    output_dir: str
    strict_ball: bool
    extras: dict

    def echo(self) -> dict:
        """Config as recorded in summaries. The output directory is omitted
        so runs into different directories stay byte-identical."""
        payload = {
            "command": self.command,
            "problem": self.problem_name,
            "operator": self.operator_spec,
            "kappa_method": self.kappa_method,
            "kappa_value": self.kappa_value,
            "samples": self.samples,
            "seed": self.seed,
            "strict_ball": self.strict_ball,
            "integrator": {
                "abs_tol": self.integrator.abs_tol,
                "rel_tol": self.integrator.rel_tol,
                "initial_step": self.integrator.initial_step,
                "max_steps": self.integrator.max_steps,
                "checkpoint_count": self.integrator.checkpoint_count,
            },
        }
        payload.update(self.extras)
        return payload


# ---------------------------------------------------------------------------
# Config file + flag resolution
# ---------------------------------------------------------------------------

def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise _ConfigError(f"config file not found: {path}")
    values = {}
    for section in ("run", "integrator"):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            key = key.lower()
            try:
                if key in _INT_KEYS:
                    values[key] = int(raw)
                elif key in _FLOAT_KEYS:
                    values[key] = float(raw)
                elif key in _BOOL_KEYS:
                    values[key] = parser.getboolean(section, key)
                else:
                    values[key] = raw
            except ValueError as exc:
                raise _ConfigError(
                    f"bad value for {key!r} in {path}: {raw!r}") from exc
    return values


def _parse_kappa_spec(spec: str):
    spec = spec.strip().lower()
    if spec in ("auto", "sampled", "sampled_ball", "sampled-ball"):
        return ("auto" if spec == "auto" else SAMPLED_BALL), None
    head, _, arg = spec.partition(":")
    if head in ("closed-form", "closed_form"):
        try:
            return CLOSED_FORM, float(arg)
        except ValueError as exc:
            raise _ConfigError(
                f"closed-form kappa needs a number, got {spec!r}") from exc
    raise _ConfigError(
        f"unknown kappa spec {spec!r}; expected auto, sampled, or closed-form:<v>")


def _validate_operator_syntax(spec: str) -> None:
    head, _, arg = spec.partition(":")
    head = head.strip().lower()
    if head not in ("exact-newton", "frozen", "diagonal", "damped"):
        raise _ConfigError(f"unknown operator {spec!r}")
    if head in ("exact-newton", "diagonal") and arg:
        raise _ConfigError(f"operator {head!r} takes no argument, got {spec!r}")
    if arg:
        try:
            float(arg)
        except ValueError as exc:
            raise _ConfigError(
                f"operator argument must be a number, got {spec!r}") from exc


def _parse_g(raw) -> np.ndarray:
    if raw is None:
        raise _ConfigError("invert needs --g")
    if isinstance(raw, (list, tuple, np.ndarray)):
        return np.asarray(raw, dtype=float)
    try:
        return np.array([float(part) for part in str(raw).split(",")])
    except ValueError as exc:
        raise _ConfigError(f"bad --g value {raw!r}; expected comma-separated numbers") from exc


def _resolve_runconfig(args: argparse.Namespace) -> RunConfig:
    file_vals = _load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(key, default=None):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        if key in file_vals:
            return file_vals[key]
        return DEFAULTS.get(key, default)

    command = args.command
    problem_name = pick("problem")
    if command in ("follow", "build-path", "restart", "kappa") and not problem_name:
        raise _ConfigError(f"{command} needs --problem")
    operator_spec = str(pick("operator"))
    _validate_operator_syntax(operator_spec)
    kappa_method, kappa_value = _parse_kappa_spec(str(pick("kappa")))
    samples = int(pick("samples"))
    if samples < 1:
        raise _ConfigError(f"samples must be at least 1, got {samples}")
    seed = int(pick("seed"))
    try:
        integrator = IntegratorConfig(
            abs_tol=float(pick("abs_tol")),
            rel_tol=float(pick("rel_tol")),
            initial_step=float(pick("initial_step")),
            max_steps=int(pick("max_steps")),
            checkpoint_count=int(pick("checkpoints")),
        )
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc
    output_dir = pick("out") or os.path.join("runs", command)

    extras = {}
    if command == "follow":
        flow = str(pick("flow")).lower()
        if flow not in ("homotopy", "decay"):
            raise _ConfigError(f"--flow must be homotopy or decay, got {flow!r}")
        horizon = float(pick("horizon"))
        if horizon < 0.0:
            raise _ConfigError(f"--horizon must be nonnegative, got {horizon}")
        if flow == "decay" and operator_spec != "exact-newton":
            raise _ConfigError(
                "the decay flow is defined by the exact inverse; "
                "drop --operator or set it to exact-newton")
        extras = {"flow": flow, "horizon": horizon}
    elif command == "build-path":
        level = int(pick("level"))
        if level < 1:
            raise _ConfigError(f"--level must be at least 1, got {level}")
        extras = {"level": level}
    elif command == "restart":
        max_iters = int(pick("max_iters"))
        tol = float(pick("tol"))
        if max_iters < 1:
            raise _ConfigError(f"--max-iters must be at least 1, got {max_iters}")
        if not (tol > 0.0):
            raise _ConfigError(f"--tol must be positive, got {tol}")
        extras = {"max_iters": max_iters, "tol": tol,
                  "refresh_operator": bool(pick("refresh_operator"))}
    elif command == "invert":
        psi = pick("psi")
        if not psi:
            raise _ConfigError("invert needs --psi")
        if psi not in psi_names():
            raise _ConfigError(
                f"unknown psi {psi!r}; known: {', '.join(psi_names())}")
        g = _parse_g(pick("g"))
        radius = float(pick("radius"))
        if not (radius > 0.0):
            raise _ConfigError(f"--radius must be positive, got {radius}")
        extras = {"psi": psi, "g": [float(v) for v in g], "radius": radius}

    return RunConfig(
        command=command,
        problem_name=problem_name,
        operator_spec=operator_spec,
        kappa_method=kappa_method,
        kappa_value=kappa_value,
        samples=samples,
        seed=seed,
        integrator=integrator,
        output_dir=str(output_dir),
        strict_ball=bool(pick("strict_ball")),
        extras=extras,
    )


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------

def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _kappa_dict(est: Optional[KappaEstimate]) -> Optional[dict]:
    if est is None:
        return None
    return {
        "method": est.method,
        "kappa_hat": est.kappa_hat,
        "samples": est.samples,
        "skipped": est.skipped,
        "seed": est.seed,
        "argmax": None if est.argmax is None else [float(v) for v in est.argmax],
    }


def _check(name: str, lhs: float, rhs: float, slack: float) -> dict:
    return {
        "name": name,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "slack": float(slack),
        "passed": bool(lhs <= rhs + slack),
    }


def _print_checks(checks) -> None:
    for c in checks:
        verdict = "PASS" if c["passed"] else "FAIL"
        print(f"  check {c['name']}: {verdict} "
              f"(lhs={c['lhs']:.6g} rhs={c['rhs']:.6g} slack={c['slack']:.6g})")


def _base_summary(rc: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": rc.command,
        "config": rc.echo(),
        "status": "ok",
        "error": None,
        "checks": [],
        "passed": False,
        "wall_time_s": None,
    }


def _fail_summary(summary: dict, exc: Exception) -> None:
    summary["status"] = "failed"
    summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
    summary["passed"] = False


def _save_curve_plot(path: str, series, xlabel: str, title: str,
                     logy: bool = False) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = _SVG_HASHSALT
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, xs, ys, style in series:
        ax.plot(xs, ys, style, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.legend()
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _save_trace_plot(path: str, trace: PathTrace, title: str) -> None:
    ts = [p.t for p in trace.points]
    norms = [float(np.linalg.norm(p.residual)) for p in trace.points]
    defects = [p.defect for p in trace.points]
    bounds = [p.bound for p in trace.points]
    _save_curve_plot(path, [
        ("||F(x(t))||", ts, norms, "-"),
        ("defect", ts, defects, "-"),
        ("bound", ts, bounds, "--"),
    ], "t", title)


# ---------------------------------------------------------------------------
# Kappa resolution shared by run commands
# ---------------------------------------------------------------------------

def _resolve_kappa(rc: RunConfig, problem: Problem, operator):
    """Return (kappa used for bounds, sampled cross-check or None).

    auto uses closed-form 0 for the exact inverse (its residual operator
    is identically -Id) and ball sampling otherwise. A user-supplied
    closed form is always cross-checked against sampling: the sampled max
    is a lower estimate of the supremum, so exceeding the claimed value
    proves the claim wrong and fails the run.
    """
    method = rc.kappa_method
    if method == "auto":
        if rc.operator_spec == "exact-newton":
            used = KappaEstimate.closed_form(
                0.0, problem_name=problem.name, operator_name=operator.name)
            return used, None
        method = SAMPLED_BALL
    if method == SAMPLED_BALL:
        est = estimate_kappa(problem, operator, samples=rc.samples, seed=rc.seed)
        return est, None
    est = estimate_kappa(problem, operator, samples=rc.samples, seed=rc.seed)
    check_against_closed_form(est, rc.kappa_value)
    used = KappaEstimate.closed_form(
        rc.kappa_value, problem_name=problem.name, operator_name=operator.name)
    return used, est


def _defect_slack(rc: RunConfig, problem: Problem) -> float:
    """Integration-error budget for the defect checks: the exact inverse
    is judged by the full tolerance budget, other operators by abs_tol."""
    cfg = rc.integrator
    if rc.operator_spec == "exact-newton":
        return 100.0 * (cfg.abs_tol + cfg.rel_tol * problem.f0_norm)
    return 100.0 * cfg.abs_tol


# ---------------------------------------------------------------------------
# Run commands
# ---------------------------------------------------------------------------

def _resolve_problem(name: str) -> Problem:
    try:
        return get_problem(name)
    except KeyError as exc:
        raise _ConfigError(str(exc)) from exc


def _finish(rc: RunConfig, summary: dict, started: float, exit_code: int) -> int:
    _write_json(os.path.join(rc.output_dir, "summary.json"), summary)
    elapsed = time.perf_counter() - started
    print(f"  wall time {elapsed:.3f} s (not stored; artifacts are "
          f"reproducible byte for byte)")
    print(f"  artifacts in {rc.output_dir}")
    return exit_code


def _cmd_follow(rc: RunConfig) -> int:
    problem = _resolve_problem(rc.problem_name)
    started = time.perf_counter()
    summary = _base_summary(rc)
    os.makedirs(rc.output_dir, exist_ok=True)
    decay = rc.extras["flow"] == "decay"
    print(f"follow {problem.name} operator={rc.operator_spec} "
          f"flow={rc.extras['flow']}")
    try:
        if decay:
            trace = follow_continuous_newton(
                problem, rc.extras["horizon"], rc.integrator)
            cross = None
        else:
            operator = parse_operator_spec(rc.operator_spec, problem)
            kappa, cross = _resolve_kappa(rc, problem, operator)
            if rc.kappa_method == "auto" and rc.operator_spec == "exact-newton":
                trace = follow_davidenko(
                    problem, rc.integrator, strict_ball=rc.strict_ball)
            else:
                trace = follow_generalized(
                    problem, operator, kappa, rc.integrator,
                    strict_ball=rc.strict_ball)
    except HomopathError as exc:
        _fail_summary(summary, exc)
        return _finish(rc, summary, started, 1)

    checks = []
    if decay:
        worst = max(p.defect for p in trace.points)
        checks.append(_check("residual_decay_law", worst, 0.0,
                             100.0 * rc.integrator.abs_tol))
    else:
        worst = max(p.defect - p.bound for p in trace.points)
        slack = _defect_slack(rc, problem)
        checks.append(_check("path_defect_within_bound", worst, 0.0, slack))
        term_norm = float(np.linalg.norm(trace.points[-1].residual))
        checks.append(_check(
            "terminal_residual_within_kappa", term_norm,
            trace.kappa_used.kappa_hat * problem.f0_norm, slack))

    summary.update({
        "problem": problem.name,
        "flow": trace.flow,
        "kappa": _kappa_dict(trace.kappa_used),
        "kappa_cross_check": _kappa_dict(cross),
        "terminal": [float(v) for v in trace.terminal],
        "terminal_residual_norm": float(np.linalg.norm(trace.points[-1].residual)),
        "exited_ball": trace.exited_ball,
        "integrator_stats": {
            "steps": trace.stats.steps,
            "rejections": trace.stats.rejections,
            "max_error_estimate": trace.stats.max_error_estimate,
        },
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    })
    write_trace_csv(os.path.join(rc.output_dir, "trace.csv"),
                    trace.points, problem.n, problem.m)
    _save_trace_plot(os.path.join(rc.output_dir, "flow.svg"), trace,
                     f"{problem.name}: {trace.flow} flow")
    _print_checks(checks)
    return _finish(rc, summary, started, 0 if summary["passed"] else 1)


def _cmd_build_path(rc: RunConfig) -> int:
    problem = _resolve_problem(rc.problem_name)
    started = time.perf_counter()
    summary = _base_summary(rc)
    os.makedirs(rc.output_dir, exist_ok=True)
    level = rc.extras["level"]
    print(f"build-path {problem.name} operator={rc.operator_spec} level={level}")
    try:
        operator = parse_operator_spec(rc.operator_spec, problem)
        kappa, cross = _resolve_kappa(rc, problem, operator)
        path = builder_mod.build_path(problem, operator, level, kappa)
    except HomopathError as exc:
        _fail_summary(summary, exc)
        diag = {}
        if hasattr(exc, "index"):
            y = getattr(exc, "y", None)
            diag = {"index": getattr(exc, "index"),
                    "lhs": getattr(exc, "lhs", None),
                    "rhs": getattr(exc, "rhs", None),
                    "y": None if y is None else [float(v) for v in y]}
        summary["diagnostics"] = diag
        return _finish(rc, summary, started, 1)

    report = builder_mod.verify_path(problem, path, pairs=100, seed=rc.seed)
    cum_worst = max(d - b for d, b in zip(report.cumulative_defects,
                                          report.cumulative_bounds))
    checks = [
        _check("per_step_acceptance", report.max_step_violation, 0.0, 0.0),
        _check("cumulative_residual_schedule", cum_worst, 0.0, 0.0),
        _check("path_lipschitz_bound", report.lipschitz_violation, 0.0, 0.0),
        _check("ball_containment", report.containment_violation, 0.0, 0.0),
    ]
    summary.update({
        "problem": problem.name,
        "level": level,
        "epsilon": path.epsilon,
        "kappa": _kappa_dict(kappa),
        "kappa_cross_check": _kappa_dict(cross),
        "terminal": [float(v) for v in path.values[-1]],
        "terminal_residual_norm": float(
            np.linalg.norm(problem.evaluate(path.values[-1]))),
        "max_substeps": max(r.substep_count for r in path.accept_records),
        "report": {
            "max_step_violation": report.max_step_violation,
            "lipschitz_violation": report.lipschitz_violation,
            "containment_violation": report.containment_violation,
            "cumulative_defects": list(report.cumulative_defects),
            "cumulative_bounds": list(report.cumulative_bounds),
        },
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    })
    points = builder_mod.partition_trace_points(problem, path)
    write_trace_csv(os.path.join(rc.output_dir, "partition.csv"),
                    points, problem.n, problem.m)
    _write_json(os.path.join(rc.output_dir, "acceptance.json"),
                builder_mod.acceptance_payload(path))
    ts = [p.t for p in points]
    _save_curve_plot(os.path.join(rc.output_dir, "partition.svg"), [
        ("defect", ts, [p.defect for p in points], "o-"),
        ("bound", ts, [p.bound for p in points], "--"),
    ], "t", f"{problem.name}: level-{level} certified path")
    _print_checks(checks)
    return _finish(rc, summary, started, 0 if summary["passed"] else 1)


def _cmd_restart(rc: RunConfig) -> int:
    problem = _resolve_problem(rc.problem_name)
    started = time.perf_counter()
    summary = _base_summary(rc)
    os.makedirs(rc.output_dir, exist_ok=True)
    print(f"restart {problem.name} operator={rc.operator_spec} "
          f"max_iters={rc.extras['max_iters']} tol={rc.extras['tol']:g}")
    try:
        operator = parse_operator_spec(rc.operator_spec, problem)
        kappa, cross = _resolve_kappa(rc, problem, operator)
        refresh = None
        if rc.extras["refresh_operator"]:
            refresh = lambda p: parse_operator_spec(rc.operator_spec, p)
        seq = driver_mod.iterate_restarts(
            problem, operator, rc.extras["max_iters"], rc.extras["tol"],
            rc.integrator, kappa=kappa, refresh=refresh,
            samples=rc.samples, seed=rc.seed)
    except HomopathError as exc:
        _fail_summary(summary, exc)
        return _finish(rc, summary, started, 1)

    print(f"  {'i':>4}  {'||F(u_i)||':<24}  {'kappa^i * ||F(u_0)||':<24}")
    for i, (norm, bound) in enumerate(zip(seq.residual_norms, seq.bounds)):
        print(f"  {i:>4}  {norm:<24.16g}  {bound:<24.16g}")
    print(f"  stopped: {seq.stopped_reason}")

    checks = []
    kap = seq.driving_kappa.kappa_hat
    if kap < 1.0:
        slack = 100.0 * rc.integrator.abs_tol
        worst = max(norm - (bound + i * slack)
                    for i, (norm, bound)
                    in enumerate(zip(seq.residual_norms, seq.bounds)))
        checks.append(_check("restart_contraction_envelope", worst, 0.0, 0.0))
    failed_run = seq.stopped_reason in (driver_mod.STOP_DIVERGENCE,
                                        driver_mod.STOP_FOLLOWER_FAILURE)
    summary.update({
        "problem": problem.name,
        "kappa": _kappa_dict(seq.driving_kappa),
        "kappa_cross_check": _kappa_dict(cross),
        "iterates": [[float(v) for v in u] for u in seq.iterates],
        "residual_norms": list(seq.residual_norms),
        "bounds": list(seq.bounds),
        "per_restart_kappas": [_kappa_dict(k) for k in seq.kappas],
        "stopped_reason": seq.stopped_reason,
        "failure_message": seq.failure_message,
        "checks": checks,
        "passed": all(c["passed"] for c in checks) and not failed_run,
    })
    idx = list(range(len(seq.residual_norms)))
    _save_curve_plot(os.path.join(rc.output_dir, "restarts.svg"), [
        ("||F(u_i)||", idx, list(seq.residual_norms), "o-"),
        ("kappa^i envelope", idx, list(seq.bounds), "--"),
    ], "restart i", f"{problem.name}: restart contraction", logy=True)
    _print_checks(checks)
    return _finish(rc, summary, started, 0 if summary["passed"] else 1)


def _cmd_invert(rc: RunConfig) -> int:
    started = time.perf_counter()
    summary = _base_summary(rc)
    os.makedirs(rc.output_dir, exist_ok=True)
    g = np.asarray(rc.extras["g"], dtype=float)
    inverse = get_inverse_problem(rc.extras["psi"], g, rc.extras["radius"])
    problem = inverse.problem
    print(f"invert psi={inverse.psi_name} g={rc.extras['g']} "
          f"operator={rc.operator_spec}")
    try:
        operator = parse_operator_spec(rc.operator_spec, problem)
        kappa, cross = _resolve_kappa(rc, problem, operator)
        solution = driver_mod.solve_inverse(
            inverse, operator, rc.integrator, kappa=kappa,
            samples=rc.samples, seed=rc.seed)
    except HomopathError as exc:
        _fail_summary(summary, exc)
        return _finish(rc, summary, started, 1)

    checks = []
    if solution.kappa_used.is_closed_form:
        checks.append(_check("inverse_residual_bound", solution.achieved,
                             solution.bound, 100.0 * rc.integrator.abs_tol))
    summary.update({
        "psi": inverse.psi_name,
        "kappa": _kappa_dict(solution.kappa_used),
        "kappa_cross_check": _kappa_dict(cross),
        "u": [float(v) for v in solution.u],
        "achieved": solution.achieved,
        "bound": solution.bound,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    })
    print(f"  u = {[float(v) for v in solution.u]}")
    print(f"  ||psi(u) - g|| = {solution.achieved:.12g} "
          f"(bound {solution.bound:.12g})")
    write_trace_csv(os.path.join(rc.output_dir, "trace.csv"),
                    solution.trace.points, problem.n, problem.m)
    _save_trace_plot(os.path.join(rc.output_dir, "flow.svg"), solution.trace,
                     f"invert {inverse.psi_name}")
    _print_checks(checks)
    return _finish(rc, summary, started, 0 if summary["passed"] else 1)


def _cmd_kappa(rc: RunConfig) -> int:
    problem = _resolve_problem(rc.problem_name)
    started = time.perf_counter()
    summary = _base_summary(rc)
    os.makedirs(rc.output_dir, exist_ok=True)
    print(f"kappa {problem.name} operator={rc.operator_spec} "
          f"samples={rc.samples} seed={rc.seed}")
    try:
        operator = parse_operator_spec(rc.operator_spec, problem)
        est = estimate_kappa(problem, operator,
                             samples=rc.samples, seed=rc.seed)
    except HomopathError as exc:
        _fail_summary(summary, exc)
        return _finish(rc, summary, started, 1)

    checks = []
    if rc.kappa_method == CLOSED_FORM:
        checks.append(_check("kappa_cross_check", est.kappa_hat,
                             rc.kappa_value, 1e-8))
    summary.update({
        "problem": problem.name,
        "kappa": _kappa_dict(est),
        "closed_form_claim": rc.kappa_value,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    })
    print(f"  kappa_hat = {est.kappa_hat:.12g} "
          f"({est.samples} samples, {est.skipped} skipped)")
    if est.argmax is not None:
        print(f"  argmax = {[float(v) for v in est.argmax]}")
    _print_checks(checks)
    return _finish(rc, summary, started, 0 if summary["passed"] else 1)


def _cmd_list() -> int:
    print(f"{'name':<14} {'n':>2} {'m':>2}  {'x0':<22} {'r':>6}")
    for name, problem in corpus().items():
        x0 = "[" + ", ".join(f"{v:g}" for v in problem.x0) + "]"
        print(f"{name:<14} {problem.n:>2} {problem.m:>2}  {x0:<22} "
              f"{problem.r:>6g}")
    print(f"\ninvertible maps for `invert --psi`: {', '.join(psi_names())}")
    return 0


# ---------------------------------------------------------------------------
# verify: re-check a finished run's artifacts from disk
# ---------------------------------------------------------------------------

def _read_trace_csv(path: str, n: int, m: int):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != trace_csv_header(n, m):
        raise _ConfigError(f"unexpected trace header in {path}")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        t = float(cells[0])
        x = np.array([float(c) for c in cells[1:1 + n]])
        res = np.array([float(c) for c in cells[1 + n:1 + n + m]])
        norm_f, defect, bound = (float(cells[1 + n + m]),
                                 float(cells[2 + n + m]),
                                 float(cells[3 + n + m]))
        rows.append((t, x, res, norm_f, defect, bound,
                     bool(int(cells[4 + n + m]))))
    return rows


def _rebuild_problem(summary: dict) -> Problem:
    cfg = summary["config"]
    if summary["command"] == "invert":
        g = np.asarray(cfg["g"], dtype=float)
        return get_inverse_problem(cfg["psi"], g, cfg["radius"]).problem
    return get_problem(cfg["problem"])


def _verify_trace_run(run_dir: str, summary: dict):
    problem = _rebuild_problem(summary)
    name = "trace.csv" if summary["command"] != "build-path" else "partition.csv"
    rows = _read_trace_csv(os.path.join(run_dir, name), problem.n, problem.m)
    results = []
    repro = 0.0
    for t, x, res, norm_f, defect, bound, _ in rows:
        fresh = problem.evaluate(x)
        repro = max(repro, float(np.max(np.abs(fresh - res))))
        repro = max(repro, abs(float(np.linalg.norm(fresh)) - norm_f))
    results.append(("trace_rows_reproducible", repro <= 1e-9,
                    f"max deviation {repro:.3g}"))

    kap = summary["kappa"]["kappa_hat"]
    decay = summary.get("flow") == FLOW_CONTINUOUS_NEWTON
    for stored in summary["checks"]:
        cname, rhs, slack = stored["name"], stored["rhs"], stored["slack"]
        if cname == "residual_decay_law":
            lhs = max(abs(float(np.linalg.norm(problem.evaluate(x)))
                          - math.exp(-t) * problem.f0_norm)
                      for t, x, *_ in rows)
        elif cname == "path_defect_within_bound":
            lhs = max(float(np.linalg.norm(problem.evaluate(x)
                                           - (1.0 - t) * problem.f0))
                      - kap * t * problem.f0_norm for t, x, *_ in rows)
        elif cname == "terminal_residual_within_kappa":
            lhs = float(np.linalg.norm(problem.evaluate(rows[-1][1])))
            rhs = kap * problem.f0_norm
        elif cname == "inverse_residual_bound":
            g = np.asarray(summary["config"]["g"], dtype=float)
            lhs = float(np.linalg.norm(problem.evaluate(rows[-1][1])))
            rhs = kap * float(np.linalg.norm(g))
        else:
            continue
        results.append((cname, lhs <= rhs + slack,
                        f"lhs={lhs:.6g} rhs={rhs:.6g} slack={slack:.6g}"))
    if decay and not summary["checks"]:
        results.append(("residual_decay_law", False, "no stored checks"))
    return results


def _verify_build_run(run_dir: str, summary: dict):
    problem = _rebuild_problem(summary)
    with open(os.path.join(run_dir, "acceptance.json"), encoding="utf-8") as fh:
        acc = json.load(fh)
    rows = _read_trace_csv(os.path.join(run_dir, "partition.csv"),
                           problem.n, problem.m)
    nodes = np.array([r[0] for r in rows])
    values = tuple(r[1] for r in rows)
    kappa = KappaEstimate(
        problem_name=acc["problem"], operator_name=acc["operator"],
        kappa_hat=acc["kappa"]["kappa_hat"], method=acc["kappa"]["method"],
        samples=acc["kappa"]["samples"], skipped=acc["kappa"]["skipped"],
        seed=acc["kappa"]["seed"])
    path = builder_mod.PartitionPath(
        problem_name=acc["problem"], operator_name=acc["operator"],
        level=acc["level"], nodes=nodes, values=values,
        steps=np.diff(nodes), epsilon=acc["epsilon"],
        accept_records=tuple(
            builder_mod.AcceptRecord(index=r["index"], lhs=r["lhs"],
                                     rhs=r["rhs"],
                                     substep_count=r["substep_count"])
            for r in acc["records"]),
        kappa_used=kappa)
    results = []
    worst = 0.0
    for rec in path.accept_records:
        i = rec.index
        s = float(path.steps[i - 1])
        lhs = float(np.linalg.norm(
            problem.evaluate(values[i]) - problem.evaluate(values[i - 1])
            + s * problem.f0))
        worst = max(worst, abs(lhs - rec.lhs), lhs - rec.rhs)
    results.append(("acceptance_records_reproducible", worst <= 1e-9,
                    f"max deviation {worst:.3g}"))
    seed = summary["config"]["seed"]
    report = builder_mod.verify_path(problem, path, pairs=100, seed=seed)
    cum = max(d - b for d, b in zip(report.cumulative_defects,
                                    report.cumulative_bounds))
    results.append(("per_step_acceptance", report.max_step_violation <= 0.0,
                    f"violation {report.max_step_violation:.3g}"))
    results.append(("cumulative_residual_schedule", cum <= 0.0,
                    f"worst margin {cum:.3g}"))
    results.append(("path_lipschitz_bound", report.lipschitz_ok,
                    f"violation {report.lipschitz_violation:.3g}"))
    results.append(("ball_containment", report.containment_ok,
                    f"violation {report.containment_violation:.3g}"))
    return results


def _verify_restart_run(run_dir: str, summary: dict):
    problem = _rebuild_problem(summary)
    iterates = [np.asarray(u, dtype=float) for u in summary["iterates"]]
    norms = summary["residual_norms"]
    bounds = summary["bounds"]
    kap = summary["kappa"]["kappa_hat"]
    results = []
    worst = max(abs(float(np.linalg.norm(problem.evaluate(u))) - n)
                for u, n in zip(iterates, norms))
    results.append(("residual_norms_reproducible", worst <= 1e-9,
                    f"max deviation {worst:.3g}"))
    bworst = max(abs(kap ** i * norms[0] - b) for i, b in enumerate(bounds))
    results.append(("bounds_reproducible", bworst <= 1e-9,
                    f"max deviation {bworst:.3g}"))
    for stored in summary["checks"]:
        if stored["name"] != "restart_contraction_envelope":
            continue
        slack = 100.0 * summary["config"]["integrator"]["abs_tol"]
        lhs = max(n - (b + i * slack)
                  for i, (n, b) in enumerate(zip(norms, bounds)))
        results.append(("restart_contraction_envelope", lhs <= 0.0,
                        f"worst margin {lhs:.3g}"))
    return results


def _verify_kappa_run(run_dir: str, summary: dict):
    problem = _rebuild_problem(summary)
    cfg = summary["config"]
    operator = parse_operator_spec(cfg["operator"], problem)
    est = estimate_kappa(problem, operator, samples=cfg["samples"],
                         seed=cfg["seed"])
    gap = abs(est.kappa_hat - summary["kappa"]["kappa_hat"])
    return [("kappa_reproducible", gap <= 1e-12, f"deviation {gap:.3g}")]


def _cmd_verify(run_dir: str) -> int:
    spath = os.path.join(run_dir, "summary.json")
    if not os.path.exists(spath):
        raise _ConfigError(f"no summary.json in {run_dir}")
    with open(spath, encoding="utf-8") as fh:
        summary = json.load(fh)
    command = summary.get("command")
    print(f"verify {run_dir} (command: {command})")
    if summary.get("status") != "ok":
        print("  stored run failed; nothing to re-certify")
        return 1
    if command in ("follow", "invert"):
        results = _verify_trace_run(run_dir, summary)
    elif command == "build-path":
        results = _verify_build_run(run_dir, summary)
    elif command == "restart":
        results = _verify_restart_run(run_dir, summary)
    elif command == "kappa":
        results = _verify_kappa_run(run_dir, summary)
    else:
        raise _ConfigError(f"cannot verify runs of command {command!r}")
    ok = True
    for name, passed, detail in results:
        verdict = "PASS" if passed else "FAIL"
        print(f"  check {name}: {verdict} ({detail})")
        ok = ok and passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser, with_problem=True) -> None:
    if with_problem:
        sub.add_argument("--problem", help="corpus problem name")
    sub.add_argument("--operator",
                     help="exact-newton | frozen[:c] | diagonal | damped[:lam]")
    sub.add_argument("--kappa",
                     help="auto | sampled | closed-form:<value>")
    sub.add_argument("--samples", type=int, help="ball samples for kappa")
    sub.add_argument("--seed", type=int, help="RNG seed (recorded in outputs)")
    sub.add_argument("--out", help="output directory (default runs/<command>)")
    sub.add_argument("--config", help="INI config file; flags win")
    sub.add_argument("--abs-tol", dest="abs_tol", type=float)
    sub.add_argument("--rel-tol", dest="rel_tol", type=float)
    sub.add_argument("--initial-step", dest="initial_step", type=float)
    sub.add_argument("--max-steps", dest="max_steps", type=int)
    sub.add_argument("--checkpoints", type=int,
                     help="number of recorded checkpoints")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homopath",
        description="Residual-certified path following for nonlinear maps.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("follow", help="integrate a flow and certify its trace")
    _add_common(p)
    p.add_argument("--flow", choices=("homotopy", "decay"),
                   help="homotopy: x' = M(x)F(x0) on [0,1]; "
                        "decay: z' = -J(z)^{-1}F(z) on [0,T]")
    p.add_argument("--horizon", type=float, help="T for the decay flow")
    p.add_argument("--strict-ball", dest="strict_ball",
                   action=argparse.BooleanOptionalAction,
                   help="abort instead of flagging on trust-ball exit")

    p = subs.add_parser("build-path",
                        help="build a certified piecewise-linear path")
    _add_common(p)
    p.add_argument("--level", type=int, help="dyadic partition level k >= 1")

    p = subs.add_parser("restart", help="iterate unit-time flows to a zero")
    _add_common(p)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float, help="stop when ||F(u_i)|| <= tol")
    p.add_argument("--refresh-operator", dest="refresh_operator",
                   action=argparse.BooleanOptionalAction,
                   help="rebuild the operator at each restart center")

    p = subs.add_parser("invert", help="solve psi(u) = g approximately")
    _add_common(p, with_problem=False)
    p.add_argument("--psi", help=f"one of: {', '.join(psi_names())}")
    p.add_argument("--g", help="target vector, comma separated")
    p.add_argument("--radius", type=float, help="trust radius around 0")

    p = subs.add_parser("kappa", help="sample the contraction factor kappa")
    _add_common(p)

    p = subs.add_parser("verify", help="re-check a stored run directory")
    p.add_argument("--run", required=True, help="run directory to verify")

    subs.add_parser("list-problems", help="print the built-in corpus")
    return parser


_RUNNERS = {
    "follow": _cmd_follow,
    "build-path": _cmd_build_path,
    "restart": _cmd_restart,
    "invert": _cmd_invert,
    "kappa": _cmd_kappa,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list-problems":
            return _cmd_list()
        if args.command == "verify":
            return _cmd_verify(args.run)
        rc = _resolve_runconfig(args)
        return _RUNNERS[rc.command](rc)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    main_entry()
