"""Reaction nonlinearities d(t, x, u) with one-sided monotonicity control.

Every nonlinearity carries its u-derivative and a declared defect gamma
with d_u d >= -gamma (gamma = 0 for monotone terms).  The defect cannot be
inferred numerically in general, so it is declared per instance and only
guarded by the sampled checks in ``verify_assumptions``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .timegrid import TimeGrid, gauss_points_on_slab

Pointwise = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Nonlinearity:
    """Evaluator for d(t, x, u) and its u-derivative.

    ``value`` and ``deriv`` take (t, x, y, u) with t scalar and the rest
    numpy arrays; both must be pure and broadcast-safe.  ``gamma`` is the
    declared monotonicity defect, ``truncation`` the optional radius R of
    the linear-outside-[-R, R] modification together with its cached
    derivative bound ``lipschitz_bound``.
    """

    name: str
    value: Pointwise
    deriv: Pointwise
    gamma: float
    time_autonomous: bool = True
    truncation: Optional[float] = None
    lipschitz_bound: Optional[float] = None


def builtin(name: str, **params) -> Nonlinearity:
    """Construct one of the stock nonlinearities.

    Available: zero, cubic (u^3), quintic (u^5), cubic_abs (u^3 |u|),
    exp_m1 (e^u - 1), allen_cahn (u^3 - alpha u, requires alpha > 0).
    """
    if name == "zero":
        return Nonlinearity(
            "zero",
            lambda t, x, y, u: np.zeros_like(np.asarray(u, dtype=float)),
            lambda t, x, y, u: np.zeros_like(np.asarray(u, dtype=float)),
            gamma=0.0,
        )
    if name == "cubic":
        return Nonlinearity(
            "cubic",
            lambda t, x, y, u: u**3,
            lambda t, x, y, u: 3.0 * u**2,
            gamma=0.0,
        )
    if name == "quintic":
        return Nonlinearity(
            "quintic",
            lambda t, x, y, u: u**5,
            lambda t, x, y, u: 5.0 * u**4,
            gamma=0.0,
        )
    if name == "cubic_abs":
        return Nonlinearity(
            "cubic_abs",
            lambda t, x, y, u: u**3 * np.abs(u),
            lambda t, x, y, u: 4.0 * np.abs(u) ** 3,
            gamma=0.0,
        )
    if name == "exp_m1":
        return Nonlinearity(
            "exp_m1",
            lambda t, x, y, u: np.expm1(u),
            lambda t, x, y, u: np.exp(u),
            gamma=0.0,
        )
    if name == "allen_cahn":
        alpha = params.get("alpha")
        if alpha is None or alpha <= 0.0:
            raise ValueError("allen_cahn requires alpha > 0")
        return Nonlinearity(
            f"allen_cahn(alpha={alpha:g})",
            lambda t, x, y, u: u**3 - alpha * u,
            lambda t, x, y, u: 3.0 * u**2 - alpha,
            gamma=float(alpha),
        )
    raise ValueError(f"unknown nonlinearity {name!r}")


def truncate(d: Nonlinearity, R: float) -> Nonlinearity:
    """Linearize d outside [-R, R], keeping it C^1 across the junctions.

    The result is globally Lipschitz in u; the cached bound is the sampled
    maximum of |d_u d| on [-R, R].  The monotonicity defect is inherited.
    """
    if R <= 0.0:
        raise ValueError(f"truncation radius must be positive, got {R}")

    def value(t, x, y, u):
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, -R, R)
        return d.value(t, x, y, uc) + (u - uc) * d.deriv(t, x, y, uc)

    def deriv(t, x, y, u):
        uc = np.clip(np.asarray(u, dtype=float), -R, R)
        return d.deriv(t, x, y, uc)

    c_R = 0.0
    ugrid = np.linspace(-R, R, 2001)
    for t, x, y in _sample_points():
        c_R = max(c_R, float(np.abs(d.deriv(t, x, y, ugrid)).max()))
    return Nonlinearity(
        name=f"{d.name}|R={R:g}",
        value=value,
        deriv=deriv,
        gamma=d.gamma,
        time_autonomous=d.time_autonomous,
        truncation=float(R),
        lipschitz_bound=c_R,
    )


def slab_mean(d: Nonlinearity, grid: TimeGrid, m: int, quad_points: int = 3):
    """Slab-mean evaluator (x, y, u) -> (mean value, mean derivative) on I_m.

    Exact (no quadrature) for time-autonomous nonlinearities; otherwise both
    means are Gauss approximations with the given number of nodes.
    """
    if d.time_autonomous:
        t_m = float(grid.nodes[m])
        return lambda x, y, u: (d.value(t_m, x, y, u), d.deriv(t_m, x, y, u))

    t, w = gauss_points_on_slab(grid, m, quad_points)
    w = w / grid.steps[m - 1]

    def mean(x, y, u):
        val = sum(wi * d.value(ti, x, y, u) for ti, wi in zip(t, w))
        der = sum(wi * d.deriv(ti, x, y, u) for ti, wi in zip(t, w))
        return val, der

    return mean


def _sample_points(seed: int = 1234, count: int = 5):
    """Deterministic (t, x, y) sample used by the sampled assumption checks."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, size=(count, 3))
    return [(float(t), np.array([x]), np.array([y])) for t, x, y in pts]


def verify_assumptions(d: Nonlinearity, seed: int = 1234) -> None:
    """Sampled guard for the structural conditions on d.

    Checks d(., ., 0) = 0, d_u d >= -gamma on u in [-10, 10] step 0.1, and
    |d_u d| <= lipschitz_bound when truncated.  Raises ValueError on the
    first violation.  A passing check is evidence, not a proof.
    """
    ugrid = np.round(np.arange(-100, 101) * 0.1, 10)
    for t, x, y in _sample_points(seed):
        zero = float(np.abs(d.value(t, x, y, np.zeros(1))).max())
        if zero > 1e-14:
            raise ValueError(f"{d.name}: d(t,x,0) = {zero:.3e} != 0")
        der = np.asarray(d.deriv(t, x, y, ugrid), dtype=float)
        low = float(der.min())
        if low < -d.gamma - 1e-12:
            raise ValueError(
                f"{d.name}: derivative {low:.6g} below declared -gamma = {-d.gamma}"
            )
        if d.truncation is not None:
            high = float(np.abs(der).max())
            if high > d.lipschitz_bound + 1e-12:
                raise ValueError(
                    f"{d.name}: |derivative| {high:.6g} exceeds bound "
                    f"{d.lipschitz_bound:.6g}"
                )


def with_gamma(d: Nonlinearity, gamma: float) -> Nonlinearity:
    """Copy of d with a different declared defect (for user-defined terms)."""
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    return replace(d, gamma=float(gamma))
