import math

import numpy as np
import pytest

from dgheat.nonlinearity import builtin
from dgheat.problems import (
    MmsProblem,
    get_problem,
    mms_source,
    verify_mms,
    PROBLEM_NAMES,
)

PI = math.pi
X = np.array([0.3, 0.62])
Y = np.array([0.7, 0.11])


def sinsin(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_registry_problems_self_check(name):
    p = get_problem(name)
    verify_mms(p.exact)
    assert p.exact.sup_abs >= 0.0


def test_unknown_problem():
    with pytest.raises(ValueError):
        get_problem("does_not_exist")


def test_eigenmode_forcing_vanishes():
    # u_t = Delta u for the decaying first eigenmode, so f == 0
    p = get_problem("heat_eigenmode")
    assert p.f is None
    f = mms_source(p.exact, builtin("zero"))
    for t in (0.0, 0.05, 0.1):
        assert np.abs(f(t, X, Y)).max() <= 1e-12


def test_cubic_mms_forcing_formula():
    p = get_problem("cubic_mms")
    for t in (0.0, 0.4, 1.0):
        u = math.exp(-t) * sinsin(X, Y)
        oracle = (2.0 * PI**2 - 1.0) * u + u**3
        assert np.abs(p.f(t, X, Y) - oracle).max() <= 1e-12


def test_allen_cahn_mms_forcing_formula():
    alpha = 0.5
    p = get_problem("allen_cahn_mms")
    for t in (0.0, 0.4, 1.0):
        u = math.exp(-t) * sinsin(X, Y)
        oracle = (-1.0 + 2.0 * PI**2 - alpha) * u + u**3
        assert np.abs(p.f(t, X, Y) - oracle).max() <= 1e-12


def test_time_independent_cubic_forcing():
    # steady manufactured solution: f = 2 pi^2 u + u^3
    exact = MmsProblem(
        name="steady",
        u=lambda t, x, y: sinsin(x, y),
        u_t=lambda t, x, y: np.zeros_like(x),
        grad_u=lambda t, x, y: (
            PI * np.cos(PI * x) * np.sin(PI * y),
            PI * np.sin(PI * x) * np.cos(PI * y),
        ),
        laplacian_u=lambda t, x, y: -2.0 * PI**2 * sinsin(x, y),
        sup_abs=1.0,
    )
    verify_mms(exact)
    f = mms_source(exact, builtin("cubic"))
    u = sinsin(X, Y)
    assert np.abs(f(0.7, X, Y) - (2.0 * PI**2 * u + u**3)).max() <= 1e-12


def test_mms_source_rejects_nonzero_boundary_trace():
    bad = MmsProblem(
        name="bad-trace",
        u=lambda t, x, y: np.cos(PI * x) * np.cos(PI * y),
        u_t=lambda t, x, y: np.zeros_like(x),
        grad_u=lambda t, x, y: (
            -PI * np.sin(PI * x) * np.cos(PI * y),
            -PI * np.cos(PI * x) * np.sin(PI * y),
        ),
        laplacian_u=lambda t, x, y: -2.0 * PI**2 * np.cos(PI * x) * np.cos(PI * y),
        sup_abs=1.0,
    )
    with pytest.raises(ValueError):
        mms_source(bad, builtin("zero"))


def test_verify_mms_catches_wrong_time_derivative():
    broken = MmsProblem(
        name="broken-ut",
        u=lambda t, x, y: math.exp(-t) * sinsin(x, y),
        u_t=lambda t, x, y: +math.exp(-t) * sinsin(x, y),  # sign flipped
        grad_u=lambda t, x, y: (np.zeros_like(x), np.zeros_like(x)),
        laplacian_u=lambda t, x, y: -2.0 * PI**2 * math.exp(-t) * sinsin(x, y),
        sup_abs=1.0,
    )
    with pytest.raises(ValueError):
        verify_mms(broken)


def test_verify_mms_catches_wrong_laplacian():
    broken = MmsProblem(
        name="broken-lap",
        u=lambda t, x, y: math.exp(-t) * sinsin(x, y),
        u_t=lambda t, x, y: -math.exp(-t) * sinsin(x, y),
        grad_u=lambda t, x, y: (np.zeros_like(x), np.zeros_like(x)),
        laplacian_u=lambda t, x, y: -PI**2 * math.exp(-t) * sinsin(x, y),  # half
        sup_abs=1.0,
    )
    with pytest.raises(ValueError):
        verify_mms(broken)


def test_initial_data_matches_u_at_time_zero():
    p = get_problem("cubic_mms")
    assert np.abs(p.u0(X, Y) - p.exact.u(0.0, X, Y)).max() == 0.0
