"""Finite-difference derivatives and the analytic/FD consistency check."""

import numpy as np
import pytest

import homopath as hp
from homopath.calculus import default_step, directional_derivative_fd, jacobian


def test_directional_derivative_quadratic(quadratic):
    x = np.array([1.0])
    d = directional_derivative_fd(quadratic, x, np.array([1.0]))
    np.testing.assert_allclose(d, [2.0], atol=1e-6)


def test_jacobian_fd_matches_analytic(quadratic, sumprod):
    for prob in (quadratic, sumprod):
        x = prob.x0 + 0.1
        fd = hp.jacobian_fd(prob, x)
        exact = prob.jac(x)
        np.testing.assert_allclose(fd, exact, rtol=0, atol=1e-6)


def test_jacobian_prefers_analytic(quadratic):
    x = np.array([1.2])
    np.testing.assert_array_equal(hp.jacobian(quadratic, x), quadratic.jac(x))


def test_jacobian_falls_back_to_fd(no_jac_quadratic):
    x = np.array([1.2])
    j = jacobian(no_jac_quadratic, x)
    np.testing.assert_allclose(j, [[2.4]], atol=1e-6)


def test_jacobian_shape_mismatch():
    bad = hp.Problem(
        name="badjac",
        n=1,
        m=1,
        fun=lambda x: np.array([x[0] ** 2]),
        jac=lambda x: np.array([[1.0, 2.0]]),  # wrong shape
        x0=np.array([1.0]),
        r=1.0,
    )
    with pytest.raises(hp.DimensionMismatchError):
        hp.jacobian(bad, np.array([1.0]))


def test_default_step_scales_with_point():
    assert default_step(np.array([0.0])) == pytest.approx(np.sqrt(np.finfo(float).eps))
    assert default_step(np.array([1e6])) > default_step(np.array([1.0]))


def test_check_derivative_corpus():
    for name in hp.problem_names():
        report = hp.check_derivative(hp.get_problem(name), points=20, seed=0)
        assert report.passed, f"{name}: rel error {report.max_rel_error}"
        assert report.max_rel_error <= 1e-5


def test_check_derivative_catches_wrong_jacobian():
    lying = hp.Problem(
        name="liar",
        n=1,
        m=1,
        fun=lambda x: np.array([x[0] ** 2 - 2.0]),
        jac=lambda x: np.array([[3.0 * x[0] ** 2]]),  # derivative of x^3, not x^2
        x0=np.array([1.0]),
        r=0.5,
    )
    report = hp.check_derivative(lying, points=10, seed=0)
    assert not report.passed


def test_check_derivative_deterministic(quadratic):
    a = hp.check_derivative(quadratic, points=20, seed=3)
    b = hp.check_derivative(quadratic, points=20, seed=3)
    assert a.max_rel_error == b.max_rel_error
