"""Error measurement and empirical verification diagnostics.

Errors against an exact solution are reported in three norms: the full
space-time L2 norm, the time-sup of spatial L2 norms, and the space-time
sup norm.  The sup norms are sampled (temporal Gauss points plus slab
endpoints; spatial quadrature points plus vertices), so they are certified
lower bounds of the true suprema; the sample sets are recorded in the
result.  The regularity probe runs the linear auxiliary solver and reports
the stability quotients of the discrete solution, each normalized exactly
as the corresponding estimate is stated (including its ln(T/k) powers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fem
from .mesh import TriMesh
from .quadrature import TriangleQuadrature, triangle_quadrature
from .solver import SolverOptions, DEFAULT_OPTIONS, SpaceTimeDG0, solve_linear_aux
from .timegrid import TimeGrid, gauss_points_on_slab


@dataclass(frozen=True)
class ErrorTriple:
    l2l2: float
    linf_l2: float
    linf_linf: float
    samples: str

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.l2l2, self.linf_l2, self.linf_linf)


@dataclass(frozen=True)
class RegularityRatios:
    lemma1_ratio: float         # sup-L2 of v over L1(I;L2) of g
    lemma2_ratio: float         # (sup-L2 of Delta_h v + max jump/k) / log-normalized data
    lemma4_ratio: float         # (L1 of Delta_h v + summed L1 jumps) / log^2-normalized data
    deltah_linf_over_l2: float  # max_m  ||v_m||_inf / ||Delta_h v_m||_L2
    deltah_l2_over_l1: float    # max_m  ||v_m||_L2  / ||Delta_h v_m||_L1
    log_factor: float           # ln(T/k) used in the normalizations

    def as_dict(self) -> dict:
        return {
            "lemma1_ratio": self.lemma1_ratio,
            "lemma2_ratio": self.lemma2_ratio,
            "lemma4_ratio": self.lemma4_ratio,
            "deltah_linf_over_l2": self.deltah_linf_over_l2,
            "deltah_l2_over_l1": self.deltah_l2_over_l1,
        }


def error_norms(
    u_exact,
    traj: SpaceTimeDG0,
    time_quad_points: int = 3,
    quad: TriangleQuadrature | None = None,
) -> ErrorTriple:
    """Error of a trajectory against an exact solution u_exact(t, x, y).

    The space-time L2 norm composes temporal Gauss quadrature per slab with
    the spatial rule; both sup norms are maxima over the declared samples.
    """
    mesh, grid = traj.mesh, traj.grid
    quad = quad or triangle_quadrature(4)
    xq, yq = fem.quad_point_coords(mesh, quad)
    area = mesh.cell_areas()
    vx, vy = mesh.vertices[:, 0], mesh.vertices[:, 1]

    l2l2_sq = 0.0
    linf_l2 = 0.0
    linf_linf = 0.0
    for m in range(1, grid.num_slabs + 1):
        U = traj.slabs[m - 1]
        uq = fem.values_at_quad_points(mesh, U, quad)
        uvert = fem.nodal_values(mesh, U)
        t_nodes, t_weights = gauss_points_on_slab(grid, m, time_quad_points)
        times = list(zip(t_nodes, t_weights)) + [(grid.nodes[m], None)]
        for t, w in times:
            diff = np.asarray(u_exact(t, xq, yq), dtype=float) - uq
            spatial_sq = float((((diff * diff) * quad.weights).sum(axis=1) * area).sum())
            if w is not None:
                l2l2_sq += w * spatial_sq
            linf_l2 = max(linf_l2, math.sqrt(max(spatial_sq, 0.0)))
            vdiff = float(
                np.abs(np.asarray(u_exact(t, vx, vy), dtype=float) - uvert).max()
            )
            linf_linf = max(linf_linf, float(np.abs(diff).max()), vdiff)
    return ErrorTriple(
        l2l2=math.sqrt(max(l2l2_sq, 0.0)),
        linf_l2=linf_l2,
        linf_linf=linf_linf,
        samples=(
            f"time: {time_quad_points}-point Gauss per slab + slab endpoints; "
            f"space: {quad.name} points + vertices"
        ),
    )


def eoc(errors, hs) -> list[float]:
    """Empirical orders log(e_i/e_{i+1}) / log(h_i/h_{i+1})."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need equally many errors and hs, at least two each")
    if any(e <= 0.0 for e in errors):
        raise ValueError("errors must be positive")
    if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])) or any(h <= 0.0 for h in hs):
        raise ValueError("hs must be positive and strictly decreasing")
    return [
        math.log(e1 / e2) / math.log(h1 / h2)
        for (e1, e2), (h1, h2) in zip(zip(errors, errors[1:]), zip(hs, hs[1:]))
    ]


def boundedness_check(traj: SpaceTimeDG0, u_exact_sup: float) -> tuple[float, bool]:
    """Nodal sup of the trajectory and the check against sup|u_exact| + 1."""
    if u_exact_sup < 0.0:
        raise ValueError("u_exact_sup must be nonnegative")
    max_abs = max((float(np.abs(U).max()) if U.size else 0.0) for U in traj.slabs)
    return max_abs, max_abs <= u_exact_sup + 1.0


def _spatial_l2_of_callable(mesh, g_of_xy, quad) -> float:
    xq, yq = fem.quad_point_coords(mesh, quad)
    vals = np.broadcast_to(np.asarray(g_of_xy(xq, yq), dtype=float), xq.shape)
    area = mesh.cell_areas()
    sq = float((((vals * vals) * quad.weights).sum(axis=1) * area).sum())
    return math.sqrt(max(sq, 0.0))


def _spatial_l1_of_callable(mesh, g_of_xy, quad) -> float:
    xq, yq = fem.quad_point_coords(mesh, quad)
    vals = np.abs(np.broadcast_to(np.asarray(g_of_xy(xq, yq), dtype=float), xq.shape))
    area = mesh.cell_areas()
    return float(((vals * quad.weights).sum(axis=1) * area).sum())


def regularity_probe(
    mesh: TriMesh,
    grid: TimeGrid,
    b,
    g,
    opts: SolverOptions = DEFAULT_OPTIONS,
    gamma: Optional[float] = None,
) -> RegularityRatios:
    """Solve the linear auxiliary equation and report its stability quotients.

    Each quotient is normalized exactly as the corresponding maximal
    regularity statement: the sup-L2 bound by the L1(I;L2) data norm, the
    log-weighted bound of Delta_h v and the slab-rate jumps by the
    L-infinity data norm, and the log^2-weighted L1 bounds.  Complementary
    per-slab quotients relate sup and L2 norms of v to norms of Delta_h v.
    """
    quad = opts.quad()
    v = solve_linear_aux(mesh, grid, b, g, opts, gamma=gamma)

    # data norms (g may be a constant or a callable of (t, x, y))
    if np.isscalar(g):
        g_fun = lambda t, x, y: np.broadcast_to(float(g), x.shape)
    else:
        g_fun = g
    g_l1l2 = 0.0
    g_l1l1 = 0.0
    g_linfl2 = 0.0
    for m in range(1, grid.num_slabs + 1):
        t_nodes, t_weights = gauss_points_on_slab(grid, m, opts.time_quad_points)
        for t, w in zip(t_nodes, t_weights):
            sl2 = _spatial_l2_of_callable(mesh, lambda x, y: g_fun(t, x, y), quad)
            g_l1l2 += w * sl2
            g_l1l1 += w * _spatial_l1_of_callable(mesh, lambda x, y: g_fun(t, x, y), quad)
            g_linfl2 = max(g_linfl2, sl2)
        g_linfl2 = max(
            g_linfl2,
            _spatial_l2_of_callable(mesh, lambda x, y: g_fun(grid.nodes[m], x, y), quad),
        )
    if g_l1l2 <= 0.0:
        raise ValueError("probe data g must not be identically zero")

    if b is None:
        b_sup = 0.0
    elif np.isscalar(b):
        b_sup = abs(float(b))
    else:
        xq, yq = fem.quad_point_coords(mesh, quad)
        b_sup = 0.0
        for m in range(1, grid.num_slabs + 1):
            t_nodes, _ = gauss_points_on_slab(grid, m, opts.time_quad_points)
            for t in list(t_nodes) + [grid.nodes[m]]:
                b_sup = max(b_sup, float(np.abs(b(t, xq, yq)).max()))

    log_factor = math.log(grid.T / grid.k)
    if log_factor <= 0.0:
        raise ValueError("probe requires T/k > 1 (grid admissibility gives T/k >= 4)")

    lap = [fem.discrete_laplacian(mesh, U, opts.cg_tol) for U in v.slabs]
    jump = v.jumps()
    v_l2 = [fem.fe_norms(mesh, U)[0] for U in v.slabs]
    v_linf = [float(np.abs(U).max()) for U in v.slabs]
    lap_l2 = [fem.fe_norms(mesh, w)[0] for w in lap]
    lap_l1 = [fem.fe_l1_norm(mesh, w, quad) for w in lap]
    jump_l2 = [fem.fe_norms(mesh, w)[0] for w in jump]
    jump_l1 = [fem.fe_l1_norm(mesh, w, quad) for w in jump]
    ks = grid.steps

    lemma1 = max(v_l2) / g_l1l2
    lemma2_num = max(lap_l2) + max(jl2 / k for jl2, k in zip(jump_l2, ks))
    lemma2 = lemma2_num / (log_factor * (1.0 + b_sup) * g_linfl2)
    lemma4_num = sum(k * n for k, n in zip(ks, lap_l1)) + sum(jump_l1)
    lemma4 = lemma4_num / (log_factor**2 * (1.0 + b_sup**2) * g_l1l1)

    q1 = 0.0
    q2 = 0.0
    for vm_inf, vm_l2, dm_l2, dm_l1 in zip(v_linf, v_l2, lap_l2, lap_l1):
        if dm_l2 > 0.0:
            q1 = max(q1, vm_inf / dm_l2)
        if dm_l1 > 0.0:
            q2 = max(q2, vm_l2 / dm_l1)
    return RegularityRatios(
        lemma1_ratio=lemma1,
        lemma2_ratio=lemma2,
        lemma4_ratio=lemma4,
        deltah_linf_over_l2=q1,
        deltah_l2_over_l1=q2,
        log_factor=log_factor,
    )


def random_smooth_fe_functions(
    mesh: TriMesh, count: int, seed: int, max_mode: int = 2
) -> list[np.ndarray]:
    """Interior interpolants of seeded random low-frequency sine combinations.

    The underlying continuous functions depend only on (count, seed,
    max_mode), so the same seed yields comparable discrete functions across
    refinement levels.
    """
    rng = np.random.default_rng(seed)
    pts = mesh.vertices[mesh.vertex_of_dof]
    x, y = pts[:, 0], pts[:, 1]
    out = []
    for _ in range(count):
        coeffs = rng.normal(size=(max_mode, max_mode))
        vals = np.zeros(mesh.num_dofs)
        for i in range(1, max_mode + 1):
            for j in range(1, max_mode + 1):
                vals += coeffs[i - 1, j - 1] * np.sin(i * np.pi * x) * np.sin(
                    j * np.pi * y
                )
        out.append(vals)
    return out


@dataclass
class StudyRow:
    level: int
    h: float
    k: float
    M: int
    ndof: int
    errors: ErrorTriple
    max_abs_ukh: float
    bounded: bool
    newton_max_iters: int
    cg_max_iters: int
    min_weight: float


@dataclass
class ConvergenceReport:
    rows: list[StudyRow]
    failures: list[str]

    def eoc_columns(self) -> dict[str, list[Optional[float]]]:
        """Per-transition EOCs for the three error norms (None where undefined)."""
        cols: dict[str, list[Optional[float]]] = {
            "eoc_l2l2": [None],
            "eoc_linfl2": [None],
            "eoc_linflinf": [None],
        }
        for prev, cur in zip(self.rows, self.rows[1:]):
            for key, attr in (
                ("eoc_l2l2", "l2l2"),
                ("eoc_linfl2", "linf_l2"),
                ("eoc_linflinf", "linf_linf"),
            ):
                e1 = getattr(prev.errors, attr)
                e2 = getattr(cur.errors, attr)
                if e1 > 0.0 and e2 > 0.0 and cur.h < prev.h:
                    cols[key].append(math.log(e1 / e2) / math.log(prev.h / cur.h))
                else:
                    cols[key].append(None)
        return cols
