"""Acceptance gate: every shipped guarantee, one test and one printed line each.

Each test exercises the guarantee at its stated tolerance against closed-form
oracles (known roots, exactly integrable drifts, geometric contraction rates)
and prints a single PASS/FAIL line so the whole gate can be read at a glance
with `pytest -s tests/test_acceptance.py`.
"""

import contextlib
import dataclasses
import io
import json
import math
import time

import numpy as np

import homopath as hp
from homopath import cli

SQRT2 = math.sqrt(2.0)


def report(num, label, ok, detail):
    print(f"criterion {num:2d} {'PASS' if ok else 'FAIL'} — {label}: {detail}")
    assert ok, f"criterion {num} ({label}): {detail}"


def test_criterion_01_exact_newton_follow():
    problem = hp.get_problem("quadratic")
    start = time.perf_counter()
    trace = hp.follow_davidenko(problem)
    elapsed = time.perf_counter() - start
    terminal_err = abs(float(trace.terminal[0]) - SQRT2)
    max_defect = trace.max_defect()
    ok = (
        terminal_err <= 1e-6
        and len(trace.points) == 33
        and max_defect <= 1e-7
        and elapsed < 1.0
    )
    report(
        1,
        "exact-Newton follow on quadratic",
        ok,
        f"terminal err {terminal_err:.3g} <= 1e-6, "
        f"max defect {max_defect:.3g} <= 1e-7 at 33 checkpoints, "
        f"runtime {elapsed:.3f}s < 1s",
    )


def frozen_half_trace():
    problem = hp.get_problem("quadratic")
    operator = hp.frozen_jacobian(problem, value=-0.5)
    kappa = hp.KappaEstimate.closed_form(0.5, problem.name, operator.name)
    return problem, hp.follow_generalized(problem, operator, kappa)


def test_criterion_02_frozen_operator_terminal_bound():
    problem, trace = frozen_half_trace()
    terminal_norm = float(np.linalg.norm(trace.points[-1].residual))
    terminal_err = abs(terminal_norm - 0.25)
    law_err = max(abs(p.defect - p.t**2 / 4.0) for p in trace.points)
    ok = (
        terminal_err <= 1e-6
        and terminal_norm <= 0.5 * problem.f0_norm
        and law_err <= 1e-7
    )
    report(
        2,
        "frozen-operator contraction",
        ok,
        f"|terminal residual - 0.25| = {terminal_err:.3g} <= 1e-6, "
        f"terminal {terminal_norm:.6f} <= 0.5, "
        f"max |defect - t^2/4| = {law_err:.3g} <= 1e-7",
    )


def test_criterion_03_path_defect_inequality():
    _, trace = frozen_half_trace()
    worst = max(p.defect - 0.5 * p.t for p in trace.points)
    ok = worst <= 1e-7
    report(
        3,
        "certified defect schedule",
        ok,
        f"max(defect - 0.5*t) = {worst:.3g} <= 1e-7 at all checkpoints",
    )


def test_criterion_04_residual_decay_law():
    problem = hp.get_problem("quadratic")
    trace = hp.follow_continuous_newton(problem, 3.0)
    worst = max(
        abs(float(np.linalg.norm(p.residual)) - math.exp(-p.t) * problem.f0_norm)
        for p in trace.points
    )
    ok = worst <= 1e-6
    report(
        4,
        "exponential residual decay",
        ok,
        f"max |  ||F(z(t))|| - e^-t | = {worst:.3g} <= 1e-6 on T=3",
    )


def test_criterion_05_time_bridge():
    quad = hp.get_problem("quadratic")
    lin = hp.get_problem("linear")
    bridge_quad = hp.bridge_check(quad, 1.0)
    bridge_lin = hp.bridge_check(lin, 2.0)
    grid = np.linspace(0.0, 5.0, 51)
    roundtrip = max(
        abs(hp.reparametrize_time(hp.reparametrize_time(t), "inverse") - t)
        for t in grid
    )
    ok = bridge_quad <= 1e-6 and bridge_lin <= 1e-6 and roundtrip <= 1e-12
    report(
        5,
        "two-clock bridge",
        ok,
        f"bridge {bridge_quad:.3g} (quadratic, T=1) and {bridge_lin:.3g} "
        f"(linear, T=2) <= 1e-6; roundtrip {roundtrip:.3g} <= 1e-12 "
        f"on 51 grid points",
    )


def test_criterion_06_builder_certificates():
    problem = hp.get_problem("quadratic")
    cases = [
        (hp.exact_newton(problem), 0.0),
        (hp.frozen_jacobian(problem, value=-0.5), 0.5),
    ]
    worst_step = worst_cumulative = worst_lipschitz = worst_containment = 0.0
    for operator, kappa_true in cases:
        kappa = hp.KappaEstimate.closed_form(kappa_true, problem.name, operator.name)
        for level in (2, 3, 4, 5, 6):
            path = hp.build_path(problem, operator, level, kappa)
            rep = hp.verify_path(problem, path, pairs=100, seed=0)
            worst_step = max(worst_step, rep.max_step_violation)
            worst_cumulative = max(
                worst_cumulative,
                max(
                    d - b
                    for d, b in zip(rep.cumulative_defects, rep.cumulative_bounds)
                ),
            )
            worst_lipschitz = max(worst_lipschitz, rep.lipschitz_violation)
            worst_containment = max(worst_containment, rep.containment_violation)

    base = hp.build_path(
        problem,
        hp.exact_newton(problem),
        3,
        hp.KappaEstimate.closed_form(0.0, problem.name, "exact-newton"),
    )
    values = [v.copy() for v in base.values]
    values[5] = values[5] + 0.2
    corrupted_fails = not hp.verify_path(
        problem, dataclasses.replace(base, values=values)
    ).passed

    ok = (
        worst_step == 0.0
        and worst_cumulative <= 1e-12
        and worst_lipschitz == 0.0
        and worst_containment == 0.0
        and corrupted_fails
    )
    report(
        6,
        "dyadic path certificates",
        ok,
        f"levels 2-6, both operators: step violation {worst_step:.3g}, "
        f"cumulative excess {worst_cumulative:.3g}, "
        f"Lipschitz violation {worst_lipschitz:.3g} (100 pairs), "
        f"containment violation {worst_containment:.3g}; "
        f"corrupted control rejected: {corrupted_fails}",
    )


def test_criterion_07_restart_contraction_and_divergence():
    linear = hp.get_problem("linear")
    contracting = hp.frozen_jacobian(linear, value=-0.5)
    seq = hp.iterate_restarts(
        linear,
        contracting,
        max_iters=10,
        tol=1e-12,
        kappa=hp.KappaEstimate.closed_form(0.5, linear.name, contracting.name),
        estimate_each=False,
    )
    worst = max(
        abs(norm - 0.5**i) for i, norm in enumerate(seq.residual_norms[:11])
    )
    expanding = hp.frozen_jacobian(linear, value=1.0)
    diverging = hp.iterate_restarts(linear, expanding, max_iters=10, tol=1e-8, seed=0)
    ok = (
        worst <= 1e-8
        and diverging.stopped_reason == hp.STOP_DIVERGENCE
        and diverging.restarts <= 3
    )
    report(
        7,
        "geometric restart contraction",
        ok,
        f"max | ||F(u_i)|| - 0.5^i | = {worst:.3g} <= 1e-8 for i <= 10; "
        f"divergence flagged after {diverging.restarts} restarts (<= 3)",
    )


def test_criterion_08_inverse_solve():
    exp_inv = hp.get_inverse_problem("exp-minus-one", [1.0], r=1.0)
    sol = hp.solve_inverse(exp_inv, hp.exact_newton(exp_inv.problem))
    log2_err = abs(float(sol.u[0]) - math.log(2.0))

    ident = hp.get_inverse_problem("identity", [0.35], r=1.0)
    operator = hp.frozen_jacobian(ident.problem, value=-2.0)
    kappa = hp.KappaEstimate.closed_form(1.0, ident.problem.name, operator.name)
    ident_sol = hp.solve_inverse(ident, operator, kappa=kappa)
    bound_err = abs(ident_sol.achieved - 0.35)

    ok = log2_err <= 1e-6 and bound_err <= 1e-8
    report(
        8,
        "certified inverse solve",
        ok,
        f"|u - ln 2| = {log2_err:.3g} <= 1e-6; identity case achieves "
        f"kappa*||g|| = 0.35 within {bound_err:.3g} <= 1e-8",
    )


def test_criterion_09_derivative_consistency():
    worst_name, worst = "", 0.0
    for name in hp.problem_names():
        rep = hp.check_derivative(hp.get_problem(name), points=20, seed=0)
        if rep.max_rel_error > worst:
            worst_name, worst = name, rep.max_rel_error
    ok = worst <= 1e-5
    report(
        9,
        "analytic/FD Jacobian agreement",
        ok,
        f"worst relative error {worst:.3g} <= 1e-5 "
        f"({worst_name}, 20 in-ball points per problem)",
    )


def test_criterion_10_kappa_estimation():
    problem = hp.get_problem("quadratic")
    frozen = hp.frozen_jacobian(problem, value=-0.5)
    sampled = hp.estimate_kappa(problem, frozen, samples=200, seed=0)
    newton = hp.estimate_kappa(problem, hp.exact_newton(problem), samples=200, seed=0)

    rng = np.random.default_rng(12345)
    norm_err = 0.0
    for _ in range(200):
        m, n = rng.integers(1, 4, size=2)
        mat = rng.standard_normal((m, n)) * 10.0 ** float(rng.integers(-3, 4))
        sigma = float(np.linalg.svd(np.atleast_2d(mat), compute_uv=False)[0])
        norm_err = max(
            norm_err, abs(hp.operator_norm(mat) - sigma) / max(1.0, sigma)
        )
    norm_err = max(norm_err, hp.operator_norm(np.zeros((2, 3))))

    ok = (
        0.49 <= sampled.kappa_hat <= 0.5
        and newton.kappa_hat <= 1e-10
        and norm_err <= 1e-10
    )
    report(
        10,
        "kappa estimation",
        ok,
        f"sampled kappa {sampled.kappa_hat:.6f} in [0.49, 0.5] "
        f"(200 samples, seed 0); exact-Newton kappa {newton.kappa_hat:.3g} "
        f"<= 1e-10; operator norm vs SVD err {norm_err:.3g} <= 1e-10",
    )


def test_criterion_11_byte_identical_artifacts(tmp_path):
    follow_args = [
        "follow", "--problem", "quadratic", "--operator", "frozen:-0.5",
        "--kappa", "closed-form:0.5",
    ]
    build_args = ["build-path", "--problem", "quadratic", "--level", "4"]
    identical = []
    for label, args, names in [
        ("follow", follow_args, ("trace.csv", "summary.json")),
        ("build-path", build_args, ("partition.csv", "acceptance.json", "summary.json")),
    ]:
        first, second = tmp_path / f"{label}-a", tmp_path / f"{label}-b"
        with contextlib.redirect_stdout(io.StringIO()):
            assert cli.main(args + ["--out", str(first)]) == 0
            assert cli.main(args + ["--out", str(second)]) == 0
        for name in names:
            same = (first / name).read_bytes() == (second / name).read_bytes()
            identical.append(same)
            if same and name.endswith(".json"):
                json.loads((first / name).read_text())  # stays valid JSON
    ok = all(identical)
    report(
        11,
        "deterministic artifacts",
        ok,
        f"{len(identical)} CSV/JSON artifacts byte-identical across "
        f"repeated runs with the same config and seed",
    )
