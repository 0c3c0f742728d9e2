"""P1 finite element machinery on a TriMesh.

All matrices act on interior degrees of freedom (homogeneous Dirichlet
values are eliminated).  Mass and stiffness use the closed-form element
matrices, which are exact for P1; loads and state-dependent terms use a
symmetric triangle quadrature (degree 4 by default).  Linear systems are
solved by Jacobi-preconditioned conjugate gradients with an explicit
negative-curvature guard, so a non-SPD operator is reported rather than
silently mis-solved.

Spatial callables are evaluated on numpy arrays: g(x, y) with x, y of
shape (num_cells, num_quad_points).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import TriMesh
from .quadrature import TriangleQuadrature, triangle_quadrature

DEFAULT_CG_TOL = 1e-10
DEFAULT_CG_MAX_ITERS = 10_000


class SpdSolveError(RuntimeError):
    """CG failure: iteration cap exceeded or negative curvature detected."""

    def __init__(self, reason: str, iterations: int, residual_norm: float):
        super().__init__(
            f"{reason} (iterations={iterations}, residual={residual_norm:.3e})"
        )
        self.reason = reason
        self.iterations = iterations
        self.residual_norm = residual_norm


class NonFiniteEvaluationError(ValueError):
    """A pointwise coefficient evaluated to nan/inf during assembly."""

    def __init__(self, what: str, x: float, y: float):
        super().__init__(
            f"{what} evaluated to a non-finite value at quadrature point "
            f"({x:.8g}, {y:.8g})"
        )
        self.point = (x, y)


def _geometry(mesh: TriMesh) -> dict:
    """Per-cell areas, constant basis gradients, and scatter index arrays."""
    geom = mesh._cache.get("geom")
    if geom is not None:
        return geom
    p = mesh.vertices[mesh.cells]  # (nc, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    # b_i = y_{i+1} - y_{i+2}, c_i = x_{i+2} - x_{i+1} (cyclic)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    grads = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]  # (nc, 3, 2)

    tri_dofs = mesh.dof_of_vertex[mesh.cells]  # (nc, 3), -1 on boundary
    rows9 = np.repeat(tri_dofs, 3, axis=1).ravel()
    cols9 = np.tile(tri_dofs, (1, 3)).ravel()
    keep = (rows9 >= 0) & (cols9 >= 0)
    geom = {
        "points": p,
        "b": b,
        "c": c,
        "area": area,
        "grads": grads,
        "tri_dofs": tri_dofs,
        "rows": rows9[keep],
        "cols": cols9[keep],
        "keep": keep,
    }
    mesh._cache["geom"] = geom
    return geom


def _scatter_matrix(mesh: TriMesh, local: np.ndarray) -> sp.csr_matrix:
    """Scatter (nc, 3, 3) element matrices into the interior-DOF CSR matrix."""
    geom = _geometry(mesh)
    data = local.reshape(mesh.num_cells, 9).ravel()[geom["keep"]]
    n = mesh.num_dofs
    return sp.coo_matrix((data, (geom["rows"], geom["cols"])), shape=(n, n)).tocsr()


def _scatter_matrix_full(mesh: TriMesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    n = mesh.num_vertices
    return sp.coo_matrix((local.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()


def _local_mass(mesh: TriMesh) -> np.ndarray:
    area = _geometry(mesh)["area"]
    template = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None, None] * template[None, :, :]


def _local_stiffness(mesh: TriMesh) -> np.ndarray:
    geom = _geometry(mesh)
    b, c, area = geom["b"], geom["c"], geom["area"]
    return (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * area
    )[:, None, None]


def assemble_mass(mesh: TriMesh, include_boundary: bool = False) -> sp.csr_matrix:
    """Exact P1 mass matrix M_ij = integral of phi_i phi_j."""
    key = "mass_full" if include_boundary else "mass"
    mat = mesh._cache.get(key)
    if mat is None:
        local = _local_mass(mesh)
        mat = (
            _scatter_matrix_full(mesh, local)
            if include_boundary
            else _scatter_matrix(mesh, local)
        )
        mesh._cache[key] = mat
    return mat


def assemble_stiffness(mesh: TriMesh, include_boundary: bool = False) -> sp.csr_matrix:
    """Exact P1 stiffness matrix K_ij = integral of grad phi_i . grad phi_j."""
    key = "stiffness_full" if include_boundary else "stiffness"
    mat = mesh._cache.get(key)
    if mat is None:
        local = _local_stiffness(mesh)
        mat = (
            _scatter_matrix_full(mesh, local)
            if include_boundary
            else _scatter_matrix(mesh, local)
        )
        mesh._cache[key] = mat
    return mat


def quad_point_coords(mesh: TriMesh, quad: TriangleQuadrature):
    """Physical coordinates of all quadrature points, shape (nc, nq) each."""
    key = ("qxy", quad.name)
    xy = mesh._cache.get(key)
    if xy is None:
        p = _geometry(mesh)["points"]
        coords = np.einsum("qk,ckd->cqd", quad.points, p)
        xy = (np.ascontiguousarray(coords[:, :, 0]), np.ascontiguousarray(coords[:, :, 1]))
        mesh._cache[key] = xy
    return xy


def nodal_values(mesh: TriMesh, coeffs: np.ndarray) -> np.ndarray:
    """Extend interior coefficients by the zero boundary values."""
    full = np.zeros(mesh.num_vertices)
    full[mesh.vertex_of_dof] = coeffs
    return full


def values_at_quad_points(
    mesh: TriMesh, coeffs: np.ndarray, quad: TriangleQuadrature
) -> np.ndarray:
    """Evaluate the P1 function at all quadrature points, shape (nc, nq)."""
    cellvals = nodal_values(mesh, coeffs)[mesh.cells]  # (nc, 3)
    return cellvals @ quad.points.T


def assemble_load(
    mesh: TriMesh, g, quad: TriangleQuadrature | None = None
) -> np.ndarray:
    """Load vector b_i ~ integral of g phi_i by the spatial quadrature rule."""
    quad = quad or triangle_quadrature(4)
    x, y = quad_point_coords(mesh, quad)
    gq = np.broadcast_to(np.asarray(g(x, y), dtype=float), x.shape)
    geom = _geometry(mesh)
    contrib = (gq * quad.weights) @ quad.points * geom["area"][:, None]
    b_full = np.zeros(mesh.num_vertices)
    np.add.at(b_full, mesh.cells, contrib)
    return b_full[mesh.vertex_of_dof]


def assemble_weighted_mass(
    mesh: TriMesh, weight, quad: TriangleQuadrature | None = None
) -> sp.csr_matrix:
    """Weighted mass matrix B_ij ~ integral of w(x) phi_i phi_j."""
    quad = quad or triangle_quadrature(4)
    x, y = quad_point_coords(mesh, quad)
    wq = np.broadcast_to(np.asarray(weight(x, y), dtype=float), x.shape)
    geom = _geometry(mesh)
    local = np.einsum(
        "cq,qi,qj->cij", wq * quad.weights, quad.points, quad.points
    ) * geom["area"][:, None, None]
    return _scatter_matrix(mesh, local)


def assemble_semilinear(
    mesh: TriMesh, U: np.ndarray, dbar, quad: TriangleQuadrature | None = None
):
    """Residual and Jacobian of the state-dependent term.

    Parameters
    ----------
    U : array
        Interior coefficients of the current iterate u_h.
    dbar : callable
        Pointwise map (x, y, u) -> (value, u-derivative), vectorized over
        arrays of quadrature-point data.

    Returns
    -------
    residual : array
        residual_i ~ integral of dbar(x, u_h(x)) phi_i.
    jacobian : csr_matrix
        jacobian_ij ~ integral of d_u dbar(x, u_h(x)) phi_j phi_i
        (symmetric, same sparsity pattern as the mass matrix).
    """
    quad = quad or triangle_quadrature(4)
    x, y = quad_point_coords(mesh, quad)
    uq = values_at_quad_points(mesh, U, quad)
    val, der = dbar(x, y, uq)
    val = np.broadcast_to(np.asarray(val, dtype=float), x.shape)
    der = np.broadcast_to(np.asarray(der, dtype=float), x.shape)
    for name, arr in (("value", val), ("derivative", der)):
        if not np.isfinite(arr).all():
            c, q = np.argwhere(~np.isfinite(arr))[0]
            raise NonFiniteEvaluationError(f"nonlinearity {name}", x[c, q], y[c, q])

    geom = _geometry(mesh)
    contrib = (val * quad.weights) @ quad.points * geom["area"][:, None]
    res_full = np.zeros(mesh.num_vertices)
    np.add.at(res_full, mesh.cells, contrib)
    residual = res_full[mesh.vertex_of_dof]

    local = np.einsum(
        "cq,qi,qj->cij", der * quad.weights, quad.points, quad.points
    ) * geom["area"][:, None, None]
    return residual, _scatter_matrix(mesh, local)


def solve_spd(
    A,
    rhs: np.ndarray,
    tol: float = DEFAULT_CG_TOL,
    max_iters: int = DEFAULT_CG_MAX_ITERS,
    stats: dict | None = None,
) -> np.ndarray:
    """Jacobi-preconditioned CG for symmetric positive definite systems.

    Returns x with ||A x - rhs|| <= tol * ||rhs|| in the Euclidean norm.
    The recursion residual is re-verified against the true residual before
    accepting convergence.  Deterministic for fixed inputs.  When ``stats``
    is a dict, the iteration count is written to stats["iterations"].
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    b = np.asarray(rhs, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        if stats is not None:
            stats["iterations"] = 0
        return np.zeros_like(b)
    target = tol * bnorm

    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SpdSolveError("nonpositive diagonal entry (matrix not SPD)", 0, bnorm)
    inv_diag = 1.0 / diag

    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    rnorm = bnorm
    for it in range(1, max_iters + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SpdSolveError("negative curvature (matrix not SPD)", it, rnorm)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= target:
            r_true = b - A @ x
            rnorm = float(np.linalg.norm(r_true))
            if rnorm <= target:
                if stats is not None:
                    stats["iterations"] = it
                return x
            # recursion drifted: restart from the exact residual
            r = r_true
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SpdSolveError("iteration cap exceeded", max_iters, rnorm)


def l2_project(
    mesh: TriMesh, f, quad: TriangleQuadrature | None = None, tol: float = DEFAULT_CG_TOL
) -> np.ndarray:
    """L2-orthogonal projection of f onto the interior P1 space."""
    return solve_spd(assemble_mass(mesh), assemble_load(mesh, f, quad), tol)


def ritz_project(
    mesh: TriMesh,
    grad_u,
    quad: TriangleQuadrature | None = None,
    tol: float = DEFAULT_CG_TOL,
) -> np.ndarray:
    """Ritz (energy) projection from the gradient of the target function.

    grad_u(x, y) must return the pair (du/dx, du/dy) on arrays.
    """
    quad = quad or triangle_quadrature(4)
    x, y = quad_point_coords(mesh, quad)
    gx, gy = grad_u(x, y)
    gx = np.broadcast_to(np.asarray(gx, dtype=float), x.shape)
    gy = np.broadcast_to(np.asarray(gy, dtype=float), x.shape)
    geom = _geometry(mesh)
    mean_gx = gx @ quad.weights
    mean_gy = gy @ quad.weights
    contrib = (
        mean_gx[:, None] * geom["grads"][:, :, 0]
        + mean_gy[:, None] * geom["grads"][:, :, 1]
    ) * geom["area"][:, None]
    b_full = np.zeros(mesh.num_vertices)
    np.add.at(b_full, mesh.cells, contrib)
    return solve_spd(assemble_stiffness(mesh), b_full[mesh.vertex_of_dof], tol)


def discrete_laplacian(
    mesh: TriMesh, v: np.ndarray, tol: float = DEFAULT_CG_TOL
) -> np.ndarray:
    """Discrete Laplacian: the solution w of M w = -K v."""
    K = assemble_stiffness(mesh)
    return solve_spd(assemble_mass(mesh), -(K @ v), tol)


def fe_norms(mesh: TriMesh, v: np.ndarray) -> tuple[float, float, float]:
    """(L2 norm, H1 seminorm, nodal max norm) of an interior P1 function."""
    v = np.asarray(v, dtype=float)
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh)
    l2 = float(np.sqrt(max(v @ (M @ v), 0.0)))
    h1 = float(np.sqrt(max(v @ (K @ v), 0.0)))
    linf = float(np.abs(v).max()) if v.size else 0.0
    return l2, h1, linf


def fe_l1_norm(
    mesh: TriMesh, v: np.ndarray, quad: TriangleQuadrature | None = None
) -> float:
    """Integral of |v_h| by quadrature of the absolute P1 interpolant."""
    quad = quad or triangle_quadrature(4)
    vq = np.abs(values_at_quad_points(mesh, v, quad))
    area = _geometry(mesh)["area"]
    return float(((vq * quad.weights).sum(axis=1) * area).sum())
