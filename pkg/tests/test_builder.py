"""Constructive piecewise-linear paths on dyadic partitions."""

import dataclasses
import json

import numpy as np
import pytest

import homopath as hp
from homopath.builder import acceptance_payload, partition_trace_points


def build_quadratic(k, quadratic, kappa_zero):
    return hp.build_path(quadratic, hp.exact_newton(quadratic), k, kappa_zero)


def test_nodes_are_dyadic(quadratic, kappa_zero):
    path = build_quadratic(3, quadratic, kappa_zero)
    assert path.level == 3
    np.testing.assert_array_equal(path.nodes, np.linspace(0.0, 1.0, 9))
    np.testing.assert_array_equal(path.values[0], quadratic.x0)
    assert path.epsilon == pytest.approx(1.0 / 3.0)


def test_epsilon_shrinks_with_level(quadratic, kappa_zero):
    eps = [build_quadratic(k, quadratic, kappa_zero).epsilon for k in (2, 4, 6)]
    assert eps[0] > eps[1] > eps[2]


def test_per_step_certificates_hold(quadratic, kappa_zero):
    path = build_quadratic(4, quadratic, kappa_zero)
    assert len(path.accept_records) == 16
    for rec in path.accept_records:
        assert rec.lhs <= rec.rhs + 1e-12
        assert rec.substep_count >= 1


def test_cumulative_schedule_holds(quadratic, kappa_zero):
    path = build_quadratic(4, quadratic, kappa_zero)
    f0 = quadratic.f0
    for t, w in zip(path.nodes, path.values):
        lhs = float(np.linalg.norm(quadratic.evaluate(w) - (1.0 - t) * f0))
        assert lhs <= t * path.epsilon + 1e-12


def test_terminal_residual_small(quadratic, kappa_zero):
    path = build_quadratic(5, quadratic, kappa_zero)
    terminal = float(np.linalg.norm(quadratic.evaluate(path.values[-1])))
    assert terminal <= path.epsilon + 1e-12


def test_verify_path_passes(quadratic, kappa_zero):
    path = build_quadratic(3, quadratic, kappa_zero)
    report = hp.verify_path(quadratic, path, pairs=100, seed=0)
    assert report.passed
    assert report.max_step_violation == 0.0
    assert report.lipschitz_violation == 0.0
    assert report.containment_violation == 0.0
    for defect, bound in zip(report.cumulative_defects, report.cumulative_bounds):
        assert defect <= bound + 1e-12


def test_verify_rejects_corrupted_path(quadratic, kappa_zero):
    path = build_quadratic(3, quadratic, kappa_zero)
    values = [v.copy() for v in path.values]
    values[5] = values[5] + 0.2
    corrupted = dataclasses.replace(path, values=values)
    report = hp.verify_path(quadratic, corrupted, pairs=100, seed=0)
    assert not report.passed
    assert report.max_step_violation > 0.05


def test_frozen_operator_with_honest_kappa(quadratic, frozen_half, kappa_half):
    path = hp.build_path(quadratic, frozen_half, 4, kappa_half)
    report = hp.verify_path(quadratic, path, pairs=100, seed=0)
    assert report.passed
    for t, w in zip(path.nodes, path.values):
        lhs = float(np.linalg.norm(quadratic.evaluate(w) - (1.0 - t) * quadratic.f0))
        bound = t * path.epsilon + 0.5 * t * quadratic.f0_norm
        assert lhs <= bound + 1e-12


def test_lying_kappa_fails_decisively(quadratic):
    # wrong-sign drift walks away from the schedule; no sub-step can rescue it
    op = hp.frozen_jacobian(quadratic, value=1.0)
    lie = hp.KappaEstimate.closed_form(0.0, "quadratic", op.name)
    with pytest.raises(hp.StepAcceptanceError) as exc:
        hp.build_path(quadratic, op, 3, lie)
    err = exc.value
    assert err.index == 1
    assert err.lhs > err.rhs
    assert np.asarray(err.y).shape == (1,)


def test_refine_levels_and_distance(quadratic, kappa_zero):
    coarse = build_quadratic(3, quadratic, kappa_zero)
    fine = hp.refine(quadratic, hp.exact_newton(quadratic), coarse, kappa_zero)
    assert fine.level == 4
    assert fine.uniform_distance_from_previous is not None
    # successive levels stay within the coarse mesh's reach
    assert fine.uniform_distance_from_previous <= 2.0 * quadratic.r / 2**coarse.level


def test_refine_constant_drift_is_stationary(quadratic, frozen_half, kappa_half):
    coarse = hp.build_path(quadratic, frozen_half, 5, kappa_half)
    fine = hp.refine(quadratic, frozen_half, coarse, kappa_half)
    # constant drift makes every level trace the same straight line
    assert fine.uniform_distance_from_previous == pytest.approx(0.0, abs=1e-14)


def test_interpolate_piecewise_linear(quadratic, kappa_zero):
    path = build_quadratic(2, quadratic, kappa_zero)
    mid = path.interpolate(0.375)  # halfway between nodes 0.25 and 0.5
    np.testing.assert_allclose(mid, 0.5 * (path.values[1] + path.values[2]))
    np.testing.assert_array_equal(path.interpolate(0.5), path.values[2])
    with pytest.raises(ValueError):
        path.interpolate(1.5)


def test_containment_in_ball(quadratic, kappa_zero):
    path = build_quadratic(4, quadratic, kappa_zero)
    for w in path.values:
        assert quadratic.distance_from_start(w) <= quadratic.r + 1e-12


def test_trace_points_carry_schedule(quadratic, kappa_half, frozen_half):
    path = hp.build_path(quadratic, frozen_half, 3, kappa_half)
    points = partition_trace_points(quadratic, path)
    assert len(points) == len(path.nodes)
    for p, t in zip(points, path.nodes):
        assert p.t == t
        assert p.bound == pytest.approx(
            t * path.epsilon + 0.5 * t * quadratic.f0_norm
        )
        assert p.defect <= p.bound + 1e-12


def test_acceptance_payload_is_json_ready(quadratic, kappa_zero):
    path = build_quadratic(2, quadratic, kappa_zero)
    payload = acceptance_payload(path)
    text = json.dumps(payload, sort_keys=True)
    back = json.loads(text)
    assert back["level"] == 2
    assert back["problem"] == "quadratic"
    assert len(back["records"]) == 4


def test_builder_on_exponential(exponential):
    kappa = hp.KappaEstimate.closed_form(0.0, "exponential", "exact-newton")
    path = hp.build_path(exponential, hp.exact_newton(exponential), 3, kappa)
    assert hp.verify_path(exponential, path).passed
