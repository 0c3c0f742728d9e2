"""Time stepping for the fully discrete scheme.

The trajectory is piecewise constant in time (one P1 coefficient vector
per slab) and continuous piecewise linear in space.  Each forward step
solves the monotone semilinear system

    (M + k_m K) U_m + k_m N(U_m) = M U_{m-1} + k_m load(fbar_m)

by damped Newton, where N is the assembled slab-mean reaction term.  The
linear auxiliary equation and its backward (dual) counterpart reuse the
same per-step operator with a weighted mass instead of N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fem
from .mesh import TriMesh
from .nonlinearity import Nonlinearity, slab_mean
from .quadrature import TriangleQuadrature, triangle_quadrature
from .timegrid import TimeGrid, gauss_points_on_slab, validate_grid


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    max_halvings: int = 30
    cg_tol: float = 1e-10
    cg_max_iters: int = 10_000
    rho: float = 0.9
    time_quad_points: int = 3
    quad_degree: int = 4
    check_grid: bool = True

    def quad(self) -> TriangleQuadrature:
        return triangle_quadrature(self.quad_degree)


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class StepRecord:
    slab: int
    iterations: int
    residual_norm: float
    damping_activations: int
    min_weight: float          # min over quad points of 1 + k_m * d_u dbar
    cg_iterations: int         # max CG iterations among the inner solves
    converged: bool


@dataclass
class NewtonReport:
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.steps)

    @property
    def max_iterations(self) -> int:
        return max((s.iterations for s in self.steps), default=0)

    @property
    def max_cg_iterations(self) -> int:
        return max((s.cg_iterations for s in self.steps), default=0)

    @property
    def min_weight(self) -> float:
        return min((s.min_weight for s in self.steps), default=math.inf)

    @property
    def total_damping(self) -> int:
        return sum(s.damping_activations for s in self.steps)


@dataclass
class SpaceTimeDG0:
    """A function in the dG(0)-in-time / P1-in-space trajectory space."""

    mesh: TriMesh
    grid: TimeGrid
    slabs: list[np.ndarray]          # value on I_m, m = 1..M
    initial: np.ndarray              # u_{kh,0} (projected initial data)

    def __post_init__(self):
        if len(self.slabs) != self.grid.num_slabs:
            raise ValueError("slab count does not match the time grid")

    def jumps(self) -> list[np.ndarray]:
        """Temporal jumps [u]_{m-1} for m = 1..M ([u]_0 uses the initial value)."""
        out = [self.slabs[0] - self.initial]
        out.extend(self.slabs[m] - self.slabs[m - 1] for m in range(1, len(self.slabs)))
        return out


class GridValidityError(ValueError):
    """The time grid fails an admissibility condition required by a solver."""


class NewtonError(RuntimeError):
    def __init__(self, slab: int, record: StepRecord):
        super().__init__(
            f"Newton did not converge on slab {slab}: "
            f"{record.iterations} iterations, residual {record.residual_norm:.3e}"
        )
        self.slab = slab
        self.record = record


class MarchError(RuntimeError):
    def __init__(self, slab: int, report: NewtonReport, cause: Exception):
        super().__init__(f"time stepping failed on slab {slab}: {cause}")
        self.slab = slab
        self.report = report
        self.cause = cause


def _require_valid(grid: TimeGrid, gamma: float, opts: SolverOptions) -> None:
    if not opts.check_grid:
        return
    rep = validate_grid(grid, gamma, opts.rho)
    if not rep.ok:
        raise GridValidityError(
            f"time grid rejected: quarter_ok={rep.quarter_ok}, "
            f"smallness_ok={rep.smallness_ok} (gamma={gamma}, rho={opts.rho})"
        )


def _step_operator(mesh: TriMesh, k: float):
    """Cached M + k*K for the linear part of the step operator."""
    key = ("step_op", float(k))
    A = mesh._cache.get(key)
    if A is None:
        A = (fem.assemble_mass(mesh) + k * fem.assemble_stiffness(mesh)).tocsr()
        mesh._cache[key] = A
    return A


def step_solve(
    mesh: TriMesh,
    grid: TimeGrid,
    m: int,
    U_prev: np.ndarray,
    d: Nonlinearity,
    fbar_load: np.ndarray | None,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> tuple[np.ndarray, StepRecord]:
    """Solve one slab of the scheme by damped Newton, warm-started at U_prev.

    Returns the new slab value and a step record with iteration counts, the
    observed minimum of the Jacobian mass weight 1 + k_m d_u dbar (which the
    grid smallness condition keeps above 1 - rho), and CG statistics.
    """
    _require_valid(grid, d.gamma, opts)
    quad = opts.quad()
    k = float(grid.steps[m - 1])
    M = fem.assemble_mass(mesh)
    A_lin = _step_operator(mesh, k)

    base = slab_mean(d, grid, m, opts.time_quad_points)
    min_weight = [math.inf]

    def dbar(x, y, u):
        val, der = base(x, y, u)
        w = 1.0 + k * np.asarray(der, dtype=float)
        min_weight[0] = min(min_weight[0], float(w.min()) if w.size else math.inf)
        return val, der

    rhs = M @ U_prev
    if fbar_load is not None:
        rhs = rhs + k * fbar_load
    tol_abs = opts.newton_tol * (1.0 + float(np.linalg.norm(rhs)))

    cg_stats: dict = {}
    cg_max = 0

    def residual(U):
        res, J = fem.assemble_semilinear(mesh, U, dbar, quad)
        F = A_lin @ U + k * res - rhs
        return F, J

    U = U_prev.astype(float, copy=True)
    F, J = residual(U)
    Fnorm = float(np.linalg.norm(F))
    iters = 0
    damping = 0
    while Fnorm > tol_abs:
        if iters >= opts.newton_max_iters:
            record = StepRecord(
                m, iters, Fnorm, damping, min_weight[0], cg_max, converged=False
            )
            raise NewtonError(m, record)
        A = A_lin + k * J
        delta = fem.solve_spd(A, -F, opts.cg_tol, opts.cg_max_iters, stats=cg_stats)
        cg_max = max(cg_max, cg_stats.get("iterations", 0))
        scale = 1.0
        for _ in range(opts.max_halvings + 1):
            U_new = U + scale * delta
            F_new, J_new = residual(U_new)
            Fnorm_new = float(np.linalg.norm(F_new))
            if Fnorm_new < Fnorm:
                break
            scale *= 0.5
        if scale < 1.0:
            damping += 1
        U, F, J, Fnorm = U_new, F_new, J_new, Fnorm_new
        iters += 1
    record = StepRecord(m, iters, Fnorm, damping, min_weight[0], cg_max, converged=True)
    return U, record


def slab_source_load(
    mesh: TriMesh,
    grid: TimeGrid,
    m: int,
    f,
    quad: TriangleQuadrature,
    time_quad_points: int = 3,
) -> np.ndarray:
    """Load vector of the slab mean fbar_m by Gauss quadrature in time."""
    t, w = gauss_points_on_slab(grid, m, time_quad_points)
    w = w / grid.steps[m - 1]
    out = None
    for ti, wi in zip(t, w):
        contrib = wi * fem.assemble_load(mesh, lambda x, y: f(ti, x, y), quad)
        out = contrib if out is None else out + contrib
    return out


def march(
    mesh: TriMesh,
    grid: TimeGrid,
    d: Nonlinearity,
    f,
    u0,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> tuple[SpaceTimeDG0, NewtonReport]:
    """Full forward solve of the discrete semilinear heat equation.

    Parameters
    ----------
    f : callable or None
        Space-time forcing f(t, x, y); None means zero.
    u0 : callable or None
        Initial data u0(x, y); the initial slab value is its L2 projection.

    Raises
    ------
    MarchError
        On the first failing step, carrying the slab index and the partial
        Newton report.
    """
    _require_valid(grid, d.gamma, opts)
    quad = opts.quad()
    step_opts = replace(opts, check_grid=False)
    if u0 is None:
        U = np.zeros(mesh.num_dofs)
    else:
        U = fem.l2_project(mesh, u0, quad, opts.cg_tol)
    initial = U.copy()

    report = NewtonReport()
    slabs: list[np.ndarray] = []
    for m in range(1, grid.num_slabs + 1):
        load = (
            None
            if f is None
            else slab_source_load(mesh, grid, m, f, quad, opts.time_quad_points)
        )
        try:
            U, record = step_solve(mesh, grid, m, U, d, load, step_opts)
        except NewtonError as err:
            report.steps.append(err.record)
            raise MarchError(m, report, err) from err
        report.steps.append(record)
        slabs.append(U)
    return SpaceTimeDG0(mesh, grid, slabs, initial), report


def _slab_weight_matrix(mesh, grid, m, b, quad, time_quad_points):
    """Weighted mass for the slab mean of the coefficient b, with SPD guard."""
    k = float(grid.steps[m - 1])
    if b is None:
        return None, math.inf
    if np.isscalar(b):
        w = float(b)
        weight = 1.0 + k * w
        if weight <= 0.0:
            raise GridValidityError(
                f"per-step operator loses positivity: 1 + k*b = {weight:.3e}"
            )
        return w * fem.assemble_mass(mesh), weight

    t, tw = gauss_points_on_slab(grid, m, time_quad_points)
    tw = tw / grid.steps[m - 1]

    bbar_holder = {}

    def bbar(x, y):
        val = sum(wi * np.broadcast_to(b(ti, x, y), x.shape) for ti, wi in zip(t, tw))
        bbar_holder["min"] = float(val.min())
        return val

    B = fem.assemble_weighted_mass(mesh, bbar, quad)
    weight = 1.0 + k * bbar_holder["min"]
    if weight <= 0.0:
        raise GridValidityError(
            f"per-step operator loses positivity: min(1 + k*bbar) = {weight:.3e}"
        )
    return B, weight


def solve_linear_aux(
    mesh: TriMesh,
    grid: TimeGrid,
    b,
    g,
    opts: SolverOptions = DEFAULT_OPTIONS,
    gamma: float | None = None,
) -> SpaceTimeDG0:
    """Forward solve of the linear auxiliary equation with zero initial data.

    b is the reaction coefficient (None, a constant, or callable(t, x, y))
    satisfying b >= -gamma; g is the source in the same formats.
    """
    if gamma is None:
        gamma = max(0.0, -float(b)) if np.isscalar(b) and b is not None else 0.0
    _require_valid(grid, gamma, opts)
    quad = opts.quad()
    M = fem.assemble_mass(mesh)
    K = fem.assemble_stiffness(mesh)

    V = np.zeros(mesh.num_dofs)
    slabs = []
    for m in range(1, grid.num_slabs + 1):
        k = float(grid.steps[m - 1])
        B, _ = _slab_weight_matrix(mesh, grid, m, b, quad, opts.time_quad_points)
        A = M + k * K if B is None else M + k * K + k * B
        rhs = M @ V
        if g is not None:
            gm = (lambda t, x, y: np.broadcast_to(float(g), x.shape)) if np.isscalar(g) else g
            rhs = rhs + k * slab_source_load(mesh, grid, m, gm, quad, opts.time_quad_points)
        V = fem.solve_spd(A.tocsr(), rhs, opts.cg_tol, opts.cg_max_iters)
        slabs.append(V)
    return SpaceTimeDG0(mesh, grid, slabs, np.zeros(mesh.num_dofs))


def solve_dual(
    mesh: TriMesh,
    grid: TimeGrid,
    b,
    terminal: np.ndarray | None = None,
    source=None,
    opts: SolverOptions = DEFAULT_OPTIONS,
    gamma: float | None = None,
) -> SpaceTimeDG0:
    """Backward (dual) solve.

    Exactly one of ``terminal`` (coefficients of z_M, stepping m = M-1...1)
    or ``source`` (distributed right-hand side tested per slab, stepping
    m = M...1 from zero) must be given.
    """
    if (terminal is None) == (source is None):
        raise ValueError("give exactly one of terminal data or distributed source")
    if gamma is None:
        gamma = max(0.0, -float(b)) if np.isscalar(b) and b is not None else 0.0
    _require_valid(grid, gamma, opts)
    quad = opts.quad()
    M = fem.assemble_mass(mesh)
    K = fem.assemble_stiffness(mesh)

    Mtot = grid.num_slabs
    slabs: list[np.ndarray | None] = [None] * Mtot

    if terminal is not None:
        Z = np.asarray(terminal, dtype=float)
        slabs[Mtot - 1] = Z
        first = Mtot - 1
    else:
        Z = np.zeros(mesh.num_dofs)
        first = Mtot

    for m in range(first, 0, -1):
        k = float(grid.steps[m - 1])
        B, _ = _slab_weight_matrix(mesh, grid, m, b, quad, opts.time_quad_points)
        A = M + k * K if B is None else M + k * K + k * B
        rhs = M @ Z
        if source is not None:
            gm = (
                (lambda t, x, y: np.broadcast_to(float(source), x.shape))
                if np.isscalar(source)
                else source
            )
            rhs = rhs + k * slab_source_load(mesh, grid, m, gm, quad, opts.time_quad_points)
        Z = fem.solve_spd(A.tocsr(), rhs, opts.cg_tol, opts.cg_max_iters)
        slabs[m - 1] = Z
    return SpaceTimeDG0(mesh, grid, slabs, np.zeros(mesh.num_dofs))


def jumps(u: SpaceTimeDG0) -> list[np.ndarray]:
    """Temporal jumps [u]_{m-1}, m = 1..M; index 0 uses the initial value."""
    return u.jumps()


def b_form_primal(u: SpaceTimeDG0, phi: SpaceTimeDG0) -> float:
    """Bilinear form of the scheme in its forward (jump-on-u) arrangement."""
    M = fem.assemble_mass(u.mesh)
    K = fem.assemble_stiffness(u.mesh)
    ks = u.grid.steps
    total = sum(
        float(ks[m] * (u.slabs[m] @ (K @ phi.slabs[m]))) for m in range(len(ks))
    )
    total += float(u.slabs[0] @ (M @ phi.slabs[0]))
    for m in range(1, len(ks)):
        total += float((u.slabs[m] - u.slabs[m - 1]) @ (M @ phi.slabs[m]))
    return total


def b_form_dual(u: SpaceTimeDG0, phi: SpaceTimeDG0) -> float:
    """The same form rearranged onto jumps of the test function."""
    M = fem.assemble_mass(u.mesh)
    K = fem.assemble_stiffness(u.mesh)
    ks = u.grid.steps
    total = sum(
        float(ks[m] * (u.slabs[m] @ (K @ phi.slabs[m]))) for m in range(len(ks))
    )
    last = len(ks) - 1
    total += float(u.slabs[last] @ (M @ phi.slabs[last]))
    for m in range(last):
        total -= float(u.slabs[m] @ (M @ (phi.slabs[m + 1] - phi.slabs[m])))
    return total


def galerkin_residuals(
    traj: SpaceTimeDG0,
    d: Nonlinearity,
    f,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> list[float]:
    """Per-slab Euclidean norms of the scheme residual of a trajectory.

    Recomputes, for every slab and every interior basis function, the
    tested equation (M + k K) U_m + k N(U_m) - M U_{m-1} - k load(fbar_m);
    a converged march keeps each norm at the Newton tolerance.
    """
    mesh, grid = traj.mesh, traj.grid
    quad = opts.quad()
    M = fem.assemble_mass(mesh)
    K = fem.assemble_stiffness(mesh)
    out = []
    prev = traj.initial
    for m in range(1, grid.num_slabs + 1):
        k = float(grid.steps[m - 1])
        U = traj.slabs[m - 1]
        dbar = slab_mean(d, grid, m, opts.time_quad_points)
        res, _ = fem.assemble_semilinear(mesh, U, dbar, quad)
        F = M @ U + k * (K @ U) + k * res - M @ prev
        if f is not None:
            F = F - k * slab_source_load(mesh, grid, m, f, quad, opts.time_quad_points)
        out.append(float(np.linalg.norm(F)))
        prev = U
    return out
