"""Shared fixtures for the homopath test suite."""

import numpy as np
import pytest

import homopath as hp


@pytest.fixture
def quadratic():
    return hp.get_problem("quadratic")


@pytest.fixture
def linear():
    return hp.get_problem("linear")


@pytest.fixture
def exponential():
    return hp.get_problem("exponential")


@pytest.fixture
def sumprod():
    return hp.get_problem("sumprod")


@pytest.fixture
def trap():
    return hp.get_problem("trap")


@pytest.fixture
def frozen_half(quadratic):
    """M = -0.5 * Id on the quadratic problem; closed-form kappa is 0.5 on its ball."""
    return hp.frozen_jacobian(quadratic, value=-0.5)


@pytest.fixture
def kappa_half():
    return hp.KappaEstimate.closed_form(0.5, "quadratic", "frozen:-0.5")


@pytest.fixture
def kappa_zero():
    return hp.KappaEstimate.closed_form(0.0, "quadratic", "exact-newton")


@pytest.fixture
def run_cli():
    """Invoke the CLI in-process and return its exit code."""
    from homopath import cli

    def run(*argv):
        return cli.main([str(a) for a in argv])

    return run


@pytest.fixture
def no_jac_quadratic():
    """x^2 - 2 without an analytic Jacobian, to exercise the FD fallback."""
    return hp.Problem(
        name="quadratic-fd",
        n=1,
        m=1,
        fun=lambda x: np.array([x[0] ** 2 - 2.0]),
        x0=np.array([1.0]),
        r=0.5,
    )
