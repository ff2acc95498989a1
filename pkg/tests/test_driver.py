"""Restart iteration, divergence handling, and the inverse-function solver."""

import math

import numpy as np
import pytest

import homopath as hp


def make_rooted():
    """A problem whose start point is already a zero."""
    return hp.Problem(
        name="rooted",
        n=1,
        m=1,
        fun=lambda x: np.array([x[0] - 1.0]),
        jac=lambda x: np.array([[1.0]]),
        x0=np.array([1.0]),
        r=1.0,
    )


def frozen_on(problem, value):
    return hp.frozen_jacobian(problem, value=value)


def closed(problem, operator, value):
    return hp.KappaEstimate.closed_form(value, problem.name, operator.name)


# --- restart contraction -------------------------------------------------------


def test_geometric_contraction(linear):
    op = frozen_on(linear, -0.5)
    seq = hp.iterate_restarts(
        linear, op, max_iters=10, tol=1e-12, kappa=closed(linear, op, 0.5),
        estimate_each=False,
    )
    assert seq.stopped_reason == hp.STOP_MAX_ITERATIONS
    assert seq.restarts == 10
    assert len(seq.residual_norms) == 11
    for i, norm in enumerate(seq.residual_norms):
        assert norm == pytest.approx(0.5**i, abs=1e-8)
        assert norm <= seq.bounds[i] + 1e-8
    assert seq.bounds[3] == pytest.approx(0.5**3 * seq.residual_norms[0])


def test_contraction_reaches_tolerance(linear):
    op = frozen_on(linear, -0.5)
    seq = hp.iterate_restarts(
        linear, op, max_iters=40, tol=1e-8, kappa=closed(linear, op, 0.5),
        estimate_each=False,
    )
    assert seq.stopped_reason == hp.STOP_TOLERANCE
    # 0.5^27 is the first power below 1e-8
    assert seq.restarts == 27
    assert seq.residual_norms[-1] <= 1e-8


def test_tolerance_met_before_first_restart():
    rooted = make_rooted()
    seq = hp.iterate_restarts(
        rooted, hp.exact_newton(rooted), max_iters=5, tol=1e-10,
        kappa=hp.KappaEstimate.closed_form(0.0, "rooted", "exact-newton"),
        estimate_each=False,
    )
    assert seq.stopped_reason == hp.STOP_TOLERANCE
    assert seq.restarts == 0
    assert len(seq.iterates) == 1


def test_per_restart_kappas_recorded(linear):
    op = frozen_on(linear, -0.5)
    seq = hp.iterate_restarts(
        linear, op, max_iters=3, tol=1e-12, kappa=closed(linear, op, 0.5),
        estimate_each=True, samples=50, seed=0,
    )
    assert len(seq.kappas) == seq.restarts
    # deviation is 0.5 everywhere for this operator, so every sample agrees
    for k in seq.kappas:
        assert k is not None
        assert k.kappa_hat == pytest.approx(0.5, abs=1e-12)
    assert seq.driving_kappa.kappa_hat == 0.5


def test_divergence_detected_within_three_restarts(linear):
    op = frozen_on(linear, 1.0)  # drift away from the zero, kappa = 2
    seq = hp.iterate_restarts(linear, op, max_iters=10, tol=1e-8, seed=0)
    assert seq.stopped_reason == hp.STOP_DIVERGENCE
    assert seq.restarts <= 3
    np.testing.assert_allclose(seq.residual_norms, [1.0, 2.0, 4.0], atol=1e-9)
    assert seq.driving_kappa.kappa_hat >= 1.0


def test_unbounded_iterates_abort(linear):
    # a lying kappa < 1 disables the two-increase rule, so the boundedness
    # guard has to step in once the iterates blow past the start point
    op = frozen_on(linear, 1.0)
    seq = hp.iterate_restarts(
        linear, op, max_iters=200, tol=1e-12, kappa=closed(linear, op, 0.9),
        estimate_each=False,
    )
    assert seq.stopped_reason == hp.STOP_DIVERGENCE
    assert seq.restarts < 200
    assert seq.residual_norms[-1] > 1e5


def test_follower_failure_reported(sumprod):
    seq = hp.iterate_restarts(
        sumprod, hp.exact_newton(sumprod), max_iters=5, tol=1e-8,
        kappa=hp.KappaEstimate.closed_form(0.0, "sumprod", "exact-newton"),
        estimate_each=False,
    )
    assert seq.stopped_reason == hp.STOP_FOLLOWER_FAILURE
    assert seq.failure_message


def test_refresh_rebuilds_operator_per_restart(quadratic):
    centers = []

    def refresh(problem):
        centers.append(float(problem.x0[0]))
        return hp.frozen_jacobian(problem)

    seq = hp.iterate_restarts(
        quadratic, hp.frozen_jacobian(quadratic), max_iters=6, tol=1e-10,
        kappa=hp.KappaEstimate.closed_form(0.3, "quadratic", "frozen"),
        refresh=refresh, estimate_each=False,
    )
    assert seq.stopped_reason == hp.STOP_TOLERANCE
    # refresh runs once per re-centered problem (every restart after the first)
    assert len(centers) == seq.restarts - 1
    gaps = [abs(c - math.sqrt(2.0)) for c in centers]
    assert gaps == sorted(gaps, reverse=True)  # each re-center lands closer
    assert seq.residual_norms[-1] <= 1e-10


def test_terminal_property(linear):
    op = frozen_on(linear, -0.5)
    seq = hp.iterate_restarts(
        linear, op, max_iters=4, tol=1e-12, kappa=closed(linear, op, 0.5),
        estimate_each=False,
    )
    np.testing.assert_array_equal(seq.terminal, seq.iterates[-1])


# --- inverse solve ---------------------------------------------------------------


def test_inverse_exp_minus_one():
    inv = hp.get_inverse_problem("exp-minus-one", [1.0], r=1.0)
    sol = hp.solve_inverse(inv, hp.exact_newton(inv.problem))
    assert abs(float(sol.u[0]) - math.log(2.0)) <= 1e-8
    assert sol.achieved <= sol.bound + 1e-8
    assert sol.psi_name == "exp-minus-one"
    assert isinstance(sol.trace, hp.PathTrace)


def test_inverse_identity_frozen_hits_bound_exactly():
    inv = hp.get_inverse_problem("identity", [0.35], r=1.0)
    op = hp.frozen_jacobian(inv.problem, value=-2.0)  # overshoots: kappa = 1
    kappa = hp.KappaEstimate.closed_form(1.0, inv.problem.name, op.name)
    sol = hp.solve_inverse(inv, op, kappa=kappa)
    assert sol.bound == pytest.approx(0.35)
    assert sol.achieved == pytest.approx(0.35, abs=1e-8)


def test_inverse_certification_failure():
    inv = hp.get_inverse_problem("identity", [0.35], r=1.0)
    op = hp.frozen_jacobian(inv.problem, value=-2.0)
    lie = hp.KappaEstimate.closed_form(0.1, inv.problem.name, op.name)
    with pytest.raises(hp.CertificationError):
        hp.solve_inverse(inv, op, kappa=lie)
