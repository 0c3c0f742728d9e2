import math

import numpy as np
import pytest

from dgheat import fem
from dgheat.analysis import (
    boundedness_check,
    eoc,
    error_norms,
    random_smooth_fe_functions,
    regularity_probe,
)
from dgheat.mesh import build_unit_square_mesh
from dgheat.quadrature import triangle_quadrature
from dgheat.solver import SpaceTimeDG0
from dgheat.timegrid import build_uniform_grid

PI = math.pi


def eigenfunction(t, x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def center_hat(x, y):
    xi = 2.0 * x - 1.0
    eta = 2.0 * y - 1.0
    return np.maximum(
        0.0, 1.0 - np.maximum(np.abs(xi), np.maximum(np.abs(eta), np.abs(xi - eta)))
    )


def zero_traj(mesh, grid):
    M = grid.num_slabs
    return SpaceTimeDG0(
        mesh, grid, [np.zeros(mesh.num_dofs) for _ in range(M)], np.zeros(mesh.num_dofs)
    )


# ---------------------------------------------------------------- error norms


def test_error_norms_self_comparison_is_zero():
    # exact solution given by the trajectory's own space-time representation
    mesh = build_unit_square_mesh(0)
    grid = build_uniform_grid(1.0, 3)
    traj = SpaceTimeDG0(mesh, grid, [np.array([1.0])] * 3, np.array([1.0]))
    e = error_norms(lambda t, x, y: center_hat(x, y), traj)
    assert e.as_tuple() == (0.0, 0.0, 0.0)


def test_error_norms_closed_form_for_decaying_eigenmode():
    mesh = build_unit_square_mesh(3)
    T = 0.1
    grid = build_uniform_grid(T, 16)
    lam = 4.0 * PI**2

    def u(t, x, y):
        return math.exp(-2.0 * PI**2 * t) * eigenfunction(t, x, y)

    e = error_norms(u, zero_traj(mesh, grid))
    closed = 0.5 * math.sqrt((1.0 - math.exp(-lam * T)) / lam)
    assert math.isclose(e.l2l2, closed, rel_tol=1e-6)
    # sup-in-time of the spatial L2 norm is attained at t -> 0+: value 1/2
    assert e.linf_l2 <= 0.5 + 1e-12
    assert e.linf_l2 >= 0.5 * math.exp(-2.0 * PI**2 * grid.steps[0])
    assert e.linf_linf <= 1.0 + 1e-12


def test_error_norms_homogeneity():
    mesh = build_unit_square_mesh(2)
    grid = build_uniform_grid(1.0, 4)
    traj = zero_traj(mesh, grid)
    e1 = error_norms(eigenfunction, traj)
    e2 = error_norms(lambda t, x, y: 2.0 * eigenfunction(t, x, y), traj)
    assert math.isclose(e2.l2l2, 2.0 * e1.l2l2, rel_tol=1e-14)
    assert math.isclose(e2.linf_l2, 2.0 * e1.linf_l2, rel_tol=1e-14)
    assert math.isclose(e2.linf_linf, 2.0 * e1.linf_linf, rel_tol=1e-14)


def test_error_norms_sampled_cauchy_schwarz():
    # |Omega| = 1, so the sampled norms must satisfy linf_l2 <= linf_linf
    mesh = build_unit_square_mesh(2)
    grid = build_uniform_grid(1.0, 5)
    rng = np.random.default_rng(8)
    traj = SpaceTimeDG0(
        mesh,
        grid,
        [rng.normal(size=mesh.num_dofs) for _ in range(5)],
        np.zeros(mesh.num_dofs),
    )
    e = error_norms(lambda t, x, y: np.sin(3 * x + t) * y, traj)
    assert e.linf_l2 <= e.linf_linf + 1e-12
    assert e.samples  # the sample sets are declared


# ---------------------------------------------------------------- eoc


def test_eoc_examples():
    assert np.allclose(eoc([1e-2, 2.5e-3], [0.1, 0.05]), [2.0])
    assert np.allclose(eoc([1e-2, 5e-3], [0.1, 0.05]), [1.0])
    assert np.allclose(eoc([3e-4, 3e-4], [0.1, 0.05]), [0.0])


def test_eoc_input_validation():
    with pytest.raises(ValueError):
        eoc([1.0], [0.1])
    with pytest.raises(ValueError):
        eoc([1.0, 0.5], [0.1, 0.2])  # hs not decreasing
    with pytest.raises(ValueError):
        eoc([1.0, 0.0], [0.1, 0.05])  # nonpositive error
    with pytest.raises(ValueError):
        eoc([1.0, 0.5, 0.25], [0.1, 0.05])  # length mismatch


# ---------------------------------------------------------------- boundedness


def test_boundedness_trivial_cases():
    mesh = build_unit_square_mesh(0)
    grid = build_uniform_grid(1.0, 2)
    assert boundedness_check(zero_traj(mesh, grid), 0.0) == (0.0, True)
    traj = SpaceTimeDG0(mesh, grid, [np.array([3.0]), np.array([0.0])], np.zeros(1))
    max_abs, ok = boundedness_check(traj, 1.0)
    assert max_abs == 3.0 and not ok


def test_boundedness_rejects_negative_sup():
    mesh = build_unit_square_mesh(0)
    grid = build_uniform_grid(1.0, 2)
    with pytest.raises(ValueError):
        boundedness_check(zero_traj(mesh, grid), -1.0)


# ---------------------------------------------------------------- probe


def test_probe_finite_positive_ratios():
    mesh = build_unit_square_mesh(2)
    grid = build_uniform_grid(1.0, 32)
    r = regularity_probe(mesh, grid, None, eigenfunction)
    for value in r.as_dict().values():
        assert np.isfinite(value) and value > 0.0
    assert math.isclose(r.log_factor, math.log(32.0), rel_tol=1e-12)


def test_probe_invariant_under_data_scaling():
    mesh = build_unit_square_mesh(1)
    grid = build_uniform_grid(1.0, 16)
    r1 = regularity_probe(mesh, grid, None, eigenfunction)
    r10 = regularity_probe(
        mesh, grid, None, lambda t, x, y: 10.0 * eigenfunction(t, x, y)
    )
    for key, value in r1.as_dict().items():
        assert math.isclose(r10.as_dict()[key], value, rel_tol=1e-8), key


def test_probe_with_negative_coefficient():
    # exercises the relaxed-monotonicity regime b >= -gamma with gamma = 0.5
    mesh = build_unit_square_mesh(1)
    grid = build_uniform_grid(1.0, 16)
    r = regularity_probe(mesh, grid, -0.5, eigenfunction, gamma=0.5)
    for value in r.as_dict().values():
        assert np.isfinite(value) and value > 0.0


def test_probe_rejects_zero_data():
    mesh = build_unit_square_mesh(1)
    grid = build_uniform_grid(1.0, 16)
    with pytest.raises(ValueError):
        regularity_probe(mesh, grid, None, lambda t, x, y: np.zeros_like(x))


def test_probe_ratio_columns_controlled_under_refinement():
    # stand-in for the h,k-independent constants: each column either decays
    # or stays within 1.5x of its coarsest value (levels 1-3 smoke version)
    cols: dict = {}
    for i, level in enumerate((1, 2, 3)):
        mesh = build_unit_square_mesh(level)
        grid = build_uniform_grid(1.0, 8 * 4**i)
        r = regularity_probe(mesh, grid, None, eigenfunction)
        for key, value in r.as_dict().items():
            cols.setdefault(key, []).append(value)
    for key, col in cols.items():
        nonincreasing = all(b <= a * 1.02 for a, b in zip(col, col[1:]))
        banded = max(col) / min(col) <= 1.5
        assert nonincreasing or banded, (key, col)


# ---------------------------------------------------------------- seeded functions


def test_random_smooth_functions_are_reproducible_and_levelwise_consistent():
    mesh1 = build_unit_square_mesh(1)
    funcs_a = random_smooth_fe_functions(mesh1, 5, seed=7)
    funcs_b = random_smooth_fe_functions(mesh1, 5, seed=7)
    for a, b in zip(funcs_a, funcs_b):
        assert np.array_equal(a, b)
    # same seed on a finer mesh interpolates the same continuous functions:
    # values at shared lattice points coincide
    mesh2 = build_unit_square_mesh(2)
    funcs_c = random_smooth_fe_functions(mesh2, 5, seed=7)
    find = {tuple(p): i for i, p in enumerate(map(tuple, mesh2.vertices[mesh2.vertex_of_dof]))}
    for a, c in zip(funcs_a, funcs_c):
        for j, p in enumerate(map(tuple, mesh1.vertices[mesh1.vertex_of_dof])):
            assert math.isclose(a[j], c[find[p]], rel_tol=0, abs_tol=1e-12)
