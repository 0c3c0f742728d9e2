"""Temporal partitions for dG(0) stepping and the slab projections.

A grid splits (0, T] into slabs I_m = (t_{m-1}, t_m].  Piecewise-constant
(dG(0)) data lives on slabs; the slab-mean projection and right-endpoint
evaluation implemented here are the two temporal projections the scheme
needs.  Grid admissibility (neighbor-step ratio, k <= T/4, and the
smallness condition k <= rho/gamma for nonmonotone terms) is reported by
``validate_grid``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray  # 0 = t_0 < t_1 < ... < t_M = T
    steps: np.ndarray  # k_m = t_m - t_{m-1}
    k: float           # max step
    k_min: float       # min step
    T: float

    @property
    def num_slabs(self) -> int:
        return self.steps.shape[0]

    def slab(self, m: int) -> tuple[float, float]:
        """Endpoints (t_{m-1}, t_m) of slab m, 1-based."""
        self._check_index(m)
        return float(self.nodes[m - 1]), float(self.nodes[m])

    def _check_index(self, m: int) -> None:
        if not 1 <= m <= self.num_slabs:
            raise ValueError(f"slab index {m} outside 1..{self.num_slabs}")


@dataclass(frozen=True)
class GridValidityReport:
    ratio_ok: bool
    c_observed: float      # max of neighbor step ratios and their inverses
    quarter_ok: bool       # k <= T/4
    smallness_ok: bool     # k <= rho/gamma (vacuous for gamma = 0)
    gamma: float
    rho: float

    @property
    def ok(self) -> bool:
        return self.ratio_ok and self.quarter_ok and self.smallness_ok


def grid_from_nodes(nodes) -> TimeGrid:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise ValueError("need at least two time nodes")
    if nodes[0] != 0.0:
        raise ValueError("first node must be 0")
    steps = np.diff(nodes)
    if np.any(steps <= 0.0):
        raise ValueError("time nodes must be strictly increasing")
    return TimeGrid(
        nodes=nodes,
        steps=steps,
        k=float(steps.max()),
        k_min=float(steps.min()),
        T=float(nodes[-1]),
    )


def build_uniform_grid(T: float, M: int) -> TimeGrid:
    """Uniform partition of (0, T] into M slabs."""
    if T <= 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    return grid_from_nodes(np.linspace(0.0, T, M + 1))


def validate_grid(grid: TimeGrid, gamma: float, rho: float = 0.9) -> GridValidityReport:
    """Check the admissibility conditions of the time mesh.

    The neighbor-ratio constant is existential (any finite grid admits one),
    so it is reported rather than thresholded; the two explicit conditions
    k <= T/4 and, for gamma > 0, k <= rho/gamma are pass/fail.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    steps = grid.steps
    if steps.size > 1:
        r = steps[:-1] / steps[1:]
        c_observed = float(max(r.max(), (1.0 / r).max()))
    else:
        c_observed = 1.0
    slack = 1.0 + 1e-12
    quarter_ok = grid.k <= 0.25 * grid.T * slack
    smallness_ok = True if gamma == 0.0 else grid.k <= (rho / gamma) * slack
    return GridValidityReport(
        ratio_ok=np.isfinite(c_observed),
        c_observed=c_observed,
        quarter_ok=bool(quarter_ok),
        smallness_ok=bool(smallness_ok),
        gamma=gamma,
        rho=rho,
    )


def gauss_points_on_slab(grid: TimeGrid, m: int, quad_points: int = 3):
    """Gauss-Legendre nodes and weights on slab m (weights sum to k_m)."""
    grid._check_index(m)
    xi, w = np.polynomial.legendre.leggauss(quad_points)
    a, b = grid.slab(m)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * xi, half * w


def temporal_mean(grid: TimeGrid, v, m: int, quad_points: int = 3) -> float:
    """Slab mean (1/k_m) * integral of v over I_m by Gauss quadrature.

    Exact for polynomials of degree <= 2*quad_points - 1.
    """
    t, w = gauss_points_on_slab(grid, m, quad_points)
    k_m = grid.steps[m - 1]
    return float(sum(wi * v(ti) for ti, wi in zip(t, w)) / k_m)


def nodal_value(grid: TimeGrid, v, m: int) -> float:
    """Right-endpoint evaluation v(t_m) on slab m."""
    grid._check_index(m)
    return float(v(grid.nodes[m]))
