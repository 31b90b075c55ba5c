"""Structured meshes of the unit square with oriented edge topology.

Two mesh kinds are provided: a grid of squares (``RectMesh``) and a grid of
squares split into triangles (``TriMesh``).  Both share the same edge table
layout so that the element and assembly code can treat them uniformly.

Cell vertices are stored counterclockwise.  Local edge ``i`` of a cell joins
local vertices ``i`` and ``i + 1`` (cyclically).  Global edges are stored with
endpoints ``(a, b)``, ``a < b``, and sorted lexicographically, which makes the
numbering a pure function of the vertex numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIAGONALS = ("right", "left", "crisscross")


@dataclass(frozen=True)
class EdgeTable:
    """Two-sided edge records.

    ``cells[e]`` holds the adjacent cells sorted by global index, padded with
    -1 on the boundary.  ``normals[e]`` is the outward normal of ``cells[e, 0]``
    and ``tangents[e]`` points from ``vertices[e, 0]`` to ``vertices[e, 1]``.
    """

    vertices: np.ndarray
    cells: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    lengths: np.ndarray
    boundary: np.ndarray

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class CellGeometry:
    """Affine map data for one cell.

    The map is ``x = origin + jacobian @ xi`` from the reference triangle
    (0,0),(1,0),(0,1) or the reference square [0,1]^2.
    """

    vertices: np.ndarray
    origin: np.ndarray
    jacobian: np.ndarray
    det: float
    edge_lengths: np.ndarray
    outward_normals: np.ndarray
    centroid: np.ndarray
    area: float


@dataclass(frozen=True)
class _Mesh:
    n: int
    vertices: np.ndarray
    cells: np.ndarray
    edges: EdgeTable
    cell_edges: np.ndarray
    kind: str = field(default="", init=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_vertices(self) -> np.ndarray:
        ev = self.edges.vertices[self.edges.boundary]
        return np.unique(ev)

    def signed_areas(self) -> np.ndarray:
        """Shoelace areas of all cells (positive for counterclockwise cells)."""
        p = self.vertices[self.cells]
        q = np.roll(p, -1, axis=1)
        return 0.5 * np.sum(p[..., 0] * q[..., 1] - q[..., 0] * p[..., 1], axis=1)

    def edge_orientation(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        """Per local edge: +1 if the global tangent runs along the local edge,
        and +1 if the global normal is this cell's outward normal."""
        nv = self.cells.shape[1]
        c = self.cells[cell]
        eids = self.cell_edges[cell]
        # c[i] starts local edge i; a global edge starts at its lower vertex
        direction = np.where(self.edges.vertices[eids, 0] == c[:nv], 1, -1)
        normal = np.where(self.edges.cells[eids, 0] == cell, 1, -1)
        return direction, normal

    def geometry(self, cell: int) -> CellGeometry:
        return cell_geometry(self, cell)

    def dump(self, path) -> None:
        """Write "x y" vertex lines, a blank line, then one cell per line."""
        with open(path, "w") as fh:
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            fh.write("\n")
            for c in self.cells:
                fh.write(" ".join(str(int(v)) for v in c) + "\n")


@dataclass(frozen=True)
class RectMesh(_Mesh):
    """Uniform grid of ``n x n`` axis-aligned squares."""

    def __post_init__(self):
        object.__setattr__(self, "kind", "square")


@dataclass(frozen=True)
class TriMesh(_Mesh):
    """Uniform ``n x n`` grid of squares, each split into triangles."""

    diagonal: str = "right"

    def __post_init__(self):
        object.__setattr__(self, "kind", "triangle")


def _edge_table(vertices: np.ndarray, cells: np.ndarray):
    nv = cells.shape[1]
    local = np.stack([cells, np.roll(cells, -1, axis=1)], axis=-1).reshape(-1, 2)
    keys = np.sort(local, axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cell_edges = inverse.reshape(len(cells), nv)

    adj = np.full((len(uniq), 2), -1, dtype=np.int64)
    count = np.zeros(len(uniq), dtype=np.int64)
    # cells are visited in increasing order, so adj[:, 0] < adj[:, 1]
    for ci in range(len(cells)):
        for e in cell_edges[ci]:
            if count[e] >= 2:
                raise ValueError("non-manifold edge")
            adj[e, count[e]] = ci
            count[e] += 1
    boundary = count == 1

    a = vertices[uniq[:, 0]]
    b = vertices[uniq[:, 1]]
    d = b - a
    lengths = np.linalg.norm(d, axis=1)
    tangents = d / lengths[:, None]
    rot = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    # outward normal of the first cell: compare with centroid -> edge midpoint
    centroid = vertices[cells[adj[:, 0]]].mean(axis=1)
    mid = 0.5 * (a + b)
    sign = np.sign(np.sum(rot * (mid - centroid), axis=1))
    normals = rot * sign[:, None]

    table = EdgeTable(
        vertices=uniq.astype(np.int64),
        cells=adj,
        normals=normals,
        tangents=tangents,
        lengths=lengths,
        boundary=boundary,
    )
    return table, cell_edges.astype(np.int64)


def _grid_vertices(n: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"cells per side must be a positive integer, got {n!r}")
    return int(n)


def build_rect_grid(n: int) -> RectMesh:
    n = _check_n(n)
    vertices = _grid_vertices(n)
    vid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # [row j, col i]
    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([vid[j, i], vid[j, i + 1], vid[j + 1, i + 1], vid[j + 1, i]])
    cells = np.array(cells, dtype=np.int64)
    edges, cell_edges = _edge_table(vertices, cells)
    return RectMesh(n=n, vertices=vertices, cells=cells, edges=edges, cell_edges=cell_edges)


def build_tri_grid(n: int, diagonal: str = "right") -> TriMesh:
    n = _check_n(n)
    if diagonal not in DIAGONALS:
        raise ValueError(f"unknown diagonal pattern {diagonal!r}; expected one of {DIAGONALS}")
    vertices = _grid_vertices(n)
    vid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    centers = []
    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid[j, i], vid[j, i + 1]
            v01, v11 = vid[j + 1, i], vid[j + 1, i + 1]
            if diagonal == "right":
                cells += [[v00, v10, v11], [v00, v11, v01]]
            elif diagonal == "left":
                cells += [[v00, v10, v01], [v10, v11, v01]]
            else:
                c = len(vertices) + len(centers)
                centers.append([(i + 0.5) / n, (j + 0.5) / n])
                cells += [[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]
    if centers:
        vertices = np.vstack([vertices, np.array(centers)])
    cells = np.array(cells, dtype=np.int64)
    edges, cell_edges = _edge_table(vertices, cells)
    return TriMesh(
        n=n, vertices=vertices, cells=cells, edges=edges, cell_edges=cell_edges, diagonal=diagonal
    )


def cell_geometry(mesh: _Mesh, cell: int) -> CellGeometry:
    if not 0 <= cell < mesh.num_cells:
        raise IndexError(f"cell index {cell} out of range")
    v = mesh.vertices[mesh.cells[cell]]
    origin = v[0]
    if mesh.kind == "triangle":
        jac = np.column_stack([v[1] - v[0], v[2] - v[0]])
        area = 0.5 * np.linalg.det(jac)
    else:
        jac = np.column_stack([v[1] - v[0], v[3] - v[0]])
        area = np.linalg.det(jac)
    w = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(w, axis=1)
    normals = np.column_stack([w[:, 1], -w[:, 0]]) / lengths[:, None]
    return CellGeometry(
        vertices=v,
        origin=origin,
        jacobian=jac,
        det=float(np.linalg.det(jac)),
        edge_lengths=lengths,
        outward_normals=normals,
        centroid=v.mean(axis=0),
        area=float(area),
    )
