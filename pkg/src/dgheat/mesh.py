"""Structured triangulations of the unit square for P1 finite elements.

The mesh family is fixed: n x n squares (n a power of two), each split into
two right triangles along the bottom-left -> top-right diagonal.  All cells
are congruent, so the shape constant diam(tau)/|tau|^(1/2) = 2 is identical
on every cell of every refinement level.  Vertices are numbered
lexicographically by (y, x), which pins down DOF numbering and makes all
outputs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class TriMesh:
    """Conforming triangulation of (0,1)^2 with Dirichlet boundary tags.

    Attributes
    ----------
    vertices : (nv, 2) float array
        Vertex coordinates, ordered lexicographically by (y, x).
    cells : (nc, 3) int array
        Vertex index triples, counterclockwise.
    boundary_flags : (nv,) bool array
        True exactly for vertices with a coordinate equal to 0 or 1.
    dof_of_vertex : (nv,) int array
        Interior vertex -> contiguous DOF index; -1 on boundary vertices.
    vertex_of_dof : (ndof,) int array
        Inverse of ``dof_of_vertex`` restricted to interior vertices.
    h : float
        Maximal cell diameter.
    level : int
        Refinement level (n = 2**(level+1) subdivisions per side).
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_flags: np.ndarray
    dof_of_vertex: np.ndarray
    vertex_of_dof: np.ndarray
    h: float
    level: int
    # per-mesh scratch used by the assembly layer to cache matrices
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_dofs(self) -> int:
        return self.vertex_of_dof.shape[0]

    def cell_areas(self) -> np.ndarray:
        """Signed areas of all cells (positive for CCW orientation)."""
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def cell_diameters(self) -> np.ndarray:
        p = self.vertices[self.cells]
        e0 = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        e1 = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        e2 = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        return np.maximum(e0, np.maximum(e1, e2))

    def shape_constants(self) -> np.ndarray:
        """Per-cell ratio diam(tau)/|tau|^(1/2); constant 2 for this family."""
        return self.cell_diameters() / np.sqrt(self.cell_areas())


def _classify_boundary(vertices: np.ndarray) -> np.ndarray:
    # Coordinates are dyadic rationals, hence exact binary floats: the
    # comparisons below are reliable for this mesh family.
    x, y = vertices[:, 0], vertices[:, 1]
    return (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)


def _finalize(vertices: np.ndarray, cells: np.ndarray, level: int) -> TriMesh:
    flags = _classify_boundary(vertices)
    dof_of_vertex = np.full(vertices.shape[0], -1, dtype=np.int64)
    interior = np.flatnonzero(~flags)
    dof_of_vertex[interior] = np.arange(interior.size)
    p = vertices[cells]
    e = [p[:, 1] - p[:, 2], p[:, 2] - p[:, 0], p[:, 0] - p[:, 1]]
    h = float(max(np.linalg.norm(d, axis=1).max() for d in e))
    return TriMesh(
        vertices=vertices,
        cells=cells,
        boundary_flags=flags,
        dof_of_vertex=dof_of_vertex,
        vertex_of_dof=interior,
        h=h,
        level=level,
    )


def build_unit_square_mesh(level: int) -> TriMesh:
    """Build the structured mesh with 2**(level+1) subdivisions per side.

    Each grid square is split along its bottom-left -> top-right diagonal,
    which reproduces the classical 5-point stiffness stencil.
    """
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    n = 2 ** (level + 1)
    coords = np.arange(n + 1) / n
    xx, yy = np.meshgrid(coords, coords)  # row-major by y, then x
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):  # i: x-index, j: y-index
        return j * (n + 1) + i

    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            cells[k] = (v00, v10, v11)
            cells[k + 1] = (v00, v11, v01)
            k += 2
    return _finalize(vertices, cells, level)


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into 4 congruent children via edge midpoints."""
    nv = mesh.num_vertices
    edges = {}
    new_points = []

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        idx = edges.get(key)
        if idx is None:
            idx = nv + len(new_points)
            edges[key] = idx
            new_points.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
        return idx

    cells = np.empty((4 * mesh.num_cells, 3), dtype=np.int64)
    for c, (a, b, d) in enumerate(mesh.cells):
        mab, mbd, mda = midpoint(a, b), midpoint(b, d), midpoint(d, a)
        cells[4 * c + 0] = (a, mab, mda)
        cells[4 * c + 1] = (mab, b, mbd)
        cells[4 * c + 2] = (mda, mbd, d)
        cells[4 * c + 3] = (mab, mbd, mda)
    vertices = np.vstack([mesh.vertices, np.array(new_points)])
    return _finalize(vertices, cells, mesh.level + 1)


def interior_dofs(mesh: TriMesh) -> tuple[int, np.ndarray]:
    """Return (count, vertex -> DOF index map with -1 on boundary)."""
    return mesh.num_dofs, mesh.dof_of_vertex


def check_conformity(mesh: TriMesh) -> bool:
    """True iff every edge is shared by exactly 2 cells or lies on the boundary."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.cells:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            counts[key] = counts.get(key, 0) + 1
    flags = mesh.boundary_flags
    verts = mesh.vertices
    for (u, v), cnt in counts.items():
        if cnt == 2:
            continue
        if cnt != 1:
            return False
        # a once-counted edge must lie on the boundary (same side, both ends)
        pu, pv = verts[u], verts[v]
        on_side = any(
            pu[axis] == val and pv[axis] == val
            for axis in (0, 1)
            for val in (0.0, 1.0)
        )
        if not (flags[u] and flags[v] and on_side):
            return False
    return True


def dump_mesh(mesh: TriMesh, path) -> None:
    """Write the plain-text mesh dump.

    Format: one header line ``VERTICES <n> CELLS <m>``, then ``x y flag``
    per vertex, then ``i j k`` (0-based) per cell.
    """
    with open(path, "w") as fh:
        fh.write(f"VERTICES {mesh.num_vertices} CELLS {mesh.num_cells}\n")
        for (x, y), flag in zip(mesh.vertices, mesh.boundary_flags):
            fh.write(f"{x!r} {y!r} {int(flag)}\n")
        for a, b, c in mesh.cells:
            fh.write(f"{a} {b} {c}\n")
