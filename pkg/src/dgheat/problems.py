"""Manufactured solutions and the study problem registry.

A manufactured problem supplies an exact solution with its analytic
derivatives; the forcing that makes the PDE hold exactly is derived from
them.  A finite-difference self-check (time derivative and a Richardson-
extrapolated 5-point Laplacian) guards the supplied derivatives against
typos before the forcing is trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .nonlinearity import Nonlinearity, builtin

PI = math.pi


@dataclass(frozen=True)
class MmsProblem:
    """Exact space-time solution with analytic derivatives.

    All callables take (t, x, y) with numpy-array x, y.  ``sup_abs`` is the
    analytic sup of |u| over the space-time cylinder, used by boundedness
    checks.
    """

    name: str
    u: Callable
    u_t: Callable
    grad_u: Callable       # (t, x, y) -> (du/dx, du/dy)
    laplacian_u: Callable
    sup_abs: float

    def u0(self):
        return lambda x, y: self.u(0.0, x, y)


def verify_mms(problem: MmsProblem, seed: int = 0, tol: float = 1e-8) -> None:
    """Self-check the analytic derivatives by finite differences.

    The time derivative is checked by central differences; the Laplacian by
    Richardson extrapolation of the 5-point stencil (the plain second-order
    stencil bottoms out near 2e-7 in double precision, above the tolerance).
    Raises ValueError on disagreement beyond tol * (1 + |analytic value|).
    """
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.05, 0.95, size=20)
    xs = rng.uniform(0.1, 0.9, size=20)
    ys = rng.uniform(0.1, 0.9, size=20)
    eps_t = 1e-5
    eps_x = 1e-3
    for t, x, y in zip(ts, xs, ys):
        x = np.array([x])
        y = np.array([y])
        ut = float(problem.u_t(t, x, y)[0])
        ut_fd = float(
            (problem.u(t + eps_t, x, y) - problem.u(t - eps_t, x, y))[0] / (2 * eps_t)
        )
        if abs(ut - ut_fd) > tol * (1.0 + abs(ut)):
            raise ValueError(
                f"{problem.name}: time derivative mismatch at t={t:.4f}: "
                f"{ut} vs FD {ut_fd}"
            )

        lap = float(problem.laplacian_u(t, x, y)[0])

        def stencil(h):
            u = problem.u
            return float(
                (
                    u(t, x + h, y)
                    + u(t, x - h, y)
                    + u(t, x, y + h)
                    + u(t, x, y - h)
                    - 4.0 * u(t, x, y)
                )[0]
                / h**2
            )

        lap_fd = (4.0 * stencil(eps_x) - stencil(2.0 * eps_x)) / 3.0
        if abs(lap - lap_fd) > tol * (1.0 + abs(lap)):
            raise ValueError(
                f"{problem.name}: Laplacian mismatch at ({t:.4f}, {x[0]:.4f}, "
                f"{y[0]:.4f}): {lap} vs FD {lap_fd}"
            )


def mms_source(problem: MmsProblem, d: Nonlinearity, seed: int = 0):
    """Forcing f = u_t - Delta u + d(t, x, u) built from analytic derivatives.

    Rejects exact solutions whose trace on the boundary of the unit square
    is not (numerically) zero, since the solver imposes homogeneous
    Dirichlet conditions.
    """
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, 1.0, size=16)
    edge_x = np.concatenate([s, s, np.zeros(16), np.ones(16), [0, 0, 1, 1]])
    edge_y = np.concatenate([np.zeros(16), np.ones(16), s, s, [0, 1, 0, 1]])
    for t in (0.0, 0.37, 1.0):
        trace = float(np.abs(problem.u(t, edge_x, edge_y)).max())
        if trace > 1e-12:
            raise ValueError(
                f"{problem.name}: exact solution has nonzero boundary trace "
                f"{trace:.3e} at t={t}"
            )

    def f(t, x, y):
        u = problem.u(t, x, y)
        return problem.u_t(t, x, y) - problem.laplacian_u(t, x, y) + d.value(t, x, y, u)

    return f


def _eigenmode_mms(name: str, g, g_t, sup_abs: float) -> MmsProblem:
    """Separable solution g(t) * sin(pi x) sin(pi y)."""

    def phi(x, y):
        return np.sin(PI * x) * np.sin(PI * y)

    return MmsProblem(
        name=name,
        u=lambda t, x, y: g(t) * phi(x, y),
        u_t=lambda t, x, y: g_t(t) * phi(x, y),
        grad_u=lambda t, x, y: (
            g(t) * PI * np.cos(PI * x) * np.sin(PI * y),
            g(t) * PI * np.sin(PI * x) * np.cos(PI * y),
        ),
        laplacian_u=lambda t, x, y: -2.0 * PI**2 * g(t) * phi(x, y),
        sup_abs=sup_abs,
    )


@dataclass(frozen=True)
class StudyProblem:
    """A ready-to-run problem: nonlinearity, data, and (optionally) the truth."""

    name: str
    d: Nonlinearity
    exact: Optional[MmsProblem]
    f: Optional[Callable]
    u0: Optional[Callable]
    default_T: float


def get_problem(name: str) -> StudyProblem:
    """Look up a study problem by id."""
    if name == "zero":
        exact = MmsProblem(
            name="zero",
            u=lambda t, x, y: np.zeros_like(x),
            u_t=lambda t, x, y: np.zeros_like(x),
            grad_u=lambda t, x, y: (np.zeros_like(x), np.zeros_like(x)),
            laplacian_u=lambda t, x, y: np.zeros_like(x),
            sup_abs=0.0,
        )
        return StudyProblem("zero", builtin("zero"), exact, None, None, default_T=1.0)

    if name == "heat_eigenmode":
        lam = 2.0 * PI**2
        exact = _eigenmode_mms(
            name, lambda t: math.exp(-lam * t), lambda t: -lam * math.exp(-lam * t), 1.0
        )
        # u_t = Delta u exactly, so the forcing vanishes identically
        return StudyProblem(
            name, builtin("zero"), exact, None, exact.u0(), default_T=0.1
        )

    if name == "cubic_mms":
        d = builtin("cubic")
        exact = _eigenmode_mms(
            name, lambda t: math.exp(-t), lambda t: -math.exp(-t), 1.0
        )
        return StudyProblem(name, d, exact, mms_source(exact, d), exact.u0(), 1.0)

    if name == "allen_cahn_mms":
        d = builtin("allen_cahn", alpha=0.5)
        exact = _eigenmode_mms(
            name, lambda t: math.exp(-t), lambda t: -math.exp(-t), 1.0
        )
        return StudyProblem(name, d, exact, mms_source(exact, d), exact.u0(), 1.0)

    if name == "allen_cahn_osc":
        # strong time variation: isolates the O(k) error on a fixed fine mesh
        d = builtin("allen_cahn", alpha=0.5)
        exact = _eigenmode_mms(
            name,
            lambda t: math.cos(2.0 * PI * t),
            lambda t: -2.0 * PI * math.sin(2.0 * PI * t),
            1.0,
        )
        return StudyProblem(name, d, exact, mms_source(exact, d), exact.u0(), 1.0)

    raise ValueError(f"unknown problem {name!r}")


PROBLEM_NAMES = ("zero", "heat_eigenmode", "cubic_mms", "allen_cahn_mms", "allen_cahn_osc")
