"""Global function spaces on structured meshes.

Cells are grouped by their local shape and the orientation of their edges.
All cells of a group share one ``CellBasis`` (in scaled local coordinates), so
element matrices and tabulations are computed once per group.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .elements import CellBasis, CellContext, Element
from .quadrature import quad_rule


@dataclass(frozen=True)
class CellGroups:
    """Congruence classes of cells (shape + edge orientation)."""

    group_of: np.ndarray
    contexts: tuple[CellContext, ...]
    cells: tuple[np.ndarray, ...]
    centroids: np.ndarray
    scale: float

    def __len__(self) -> int:
        return len(self.contexts)

    def physical(self, X: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Context points X (npts, 2) -> physical points (ncells, npts, 2)."""
        return self.centroids[cells][:, None, :] + self.scale * X[None, :, :]


_GROUP_CACHE: dict[int, CellGroups] = {}


def cell_groups(mesh) -> CellGroups:
    key = id(mesh)
    cached = _GROUP_CACHE.get(key)
    if cached is not None and cached[0] is mesh:
        return cached[1]
    s = mesh.h
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    index: dict = {}
    contexts = []
    members: list[list[int]] = []
    group_of = np.empty(mesh.num_cells, dtype=np.int64)
    for c in range(mesh.num_cells):
        X = (mesh.vertices[mesh.cells[c]] - centroids[c]) / s
        direction, normal = mesh.edge_orientation(c)
        k = (np.round(X, 9).tobytes(), tuple(direction.tolist()), tuple(normal.tolist()))
        g = index.get(k)
        if g is None:
            g = index[k] = len(contexts)
            contexts.append(
                CellContext(mesh.kind, X, tuple(direction.tolist()), tuple(normal.tolist()))
            )
            members.append([])
        members[g].append(c)
        group_of[c] = g
    groups = CellGroups(
        group_of=group_of,
        contexts=tuple(contexts),
        cells=tuple(np.array(m, dtype=np.int64) for m in members),
        centroids=centroids,
        scale=s,
    )
    _GROUP_CACHE[key] = (mesh, groups)
    return groups


@dataclass
class Tabulation:
    """Basis data at quadrature points of one cell group."""

    points: np.ndarray  # context coordinates (nq, 2)
    weights: np.ndarray  # physical weights (nq,)
    values: np.ndarray
    grads: np.ndarray | None
    hess: np.ndarray | None


class FunctionSpace:
    """Global space: element + mesh + cell-to-global dof map."""

    def __init__(self, mesh, element: Element, name: str = ""):
        if element.cell_kind != mesh.kind:
            raise ValueError(f"{element.family} lives on {element.cell_kind}s, mesh has {mesh.kind}s")
        self.mesh = mesh
        self.element = element
        self.name = name
        self.groups = cell_groups(mesh)
        self.bases = [CellBasis(element, ctx, self.groups.scale) for ctx in self.groups.contexts]
        self._number_dofs()

    def _number_dofs(self):
        mesh = self.mesh
        nloc = self.element.dim
        dofmap = np.empty((mesh.num_cells, nloc), dtype=np.int64)
        numbering: dict = {}
        entity_of: list = []
        for c in range(mesh.num_cells):
            fs = self.bases[self.groups.group_of[c]].functionals
            for i, f in enumerate(fs):
                kind, loc = f.entity
                if kind == "vertex":
                    gid = int(mesh.cells[c, loc])
                elif kind == "edge":
                    gid = int(mesh.cell_edges[c, loc])
                else:
                    gid = c
                key = (kind, gid, f.key)
                d = numbering.get(key)
                if d is None:
                    d = numbering[key] = len(entity_of)
                    entity_of.append((kind, gid))
                dofmap[c, i] = d
        self.dofmap = dofmap
        self.dim = len(entity_of)
        bverts = set(mesh.boundary_vertices.tolist())
        bedges = set(np.flatnonzero(mesh.edges.boundary).tolist())
        self.boundary_dofs = np.array(
            [
                d
                for d, (kind, gid) in enumerate(entity_of)
                if (kind == "vertex" and gid in bverts) or (kind == "edge" and gid in bedges)
            ],
            dtype=np.int64,
        )
        self.entity_of = entity_of

    # ---- quadrature data ---------------------------------------------------

    @lru_cache(maxsize=None)
    def tabulate(self, group: int, exactness: int, order: int = 0, edge: int | None = None) -> Tabulation:
        ctx = self.groups.contexts[group]
        s = self.groups.scale
        if edge is None:
            rule = quad_rule(ctx.cell_kind, exactness)
            X = ctx.map_points(rule.points)
            w = rule.weights * abs(np.linalg.det(ctx.jacobian)) * s**2
        else:
            rule = quad_rule("interval", exactness)
            a = ctx.vertices[edge]
            b = ctx.vertices[(edge + 1) % ctx.nedges]
            X = a + rule.points[:, :1] * (b - a)
            w = rule.weights * np.linalg.norm(b - a) * s
        v, g, h = self.bases[group].evaluate(X, order)
        return Tabulation(X, w, v, g, h)

    def quadrature(self, exactness: int):
        """Physical points (ncells, nq, 2) and weights (ncells, nq)."""
        nc = self.mesh.num_cells
        pts = weights = None
        for g, cells in enumerate(self.groups.cells):
            tab = self.tabulate(g, exactness, 0)
            if pts is None:
                pts = np.empty((nc, len(tab.weights), 2))
                weights = np.empty((nc, len(tab.weights)))
            pts[cells] = self.groups.physical(tab.points, cells)
            weights[cells] = tab.weights
        return pts, weights

    @lru_cache(maxsize=None)
    def eval_matrix(self, exactness: int, order: int = 0) -> sp.csr_matrix:
        """Sparse map from coefficients to values at all quadrature points.

        Row index is ((cell * nq + q) * ncomp + c) for values and
        (((cell * nq + q) * ncomp + c) * 2 + d) for gradients (order=1).
        """
        nc = self.mesh.num_cells
        ncomp = self.element.ncomp
        rows, cols, vals = [], [], []
        for g, cells in enumerate(self.groups.cells):
            tab = self.tabulate(g, exactness, order)
            arr = tab.values if order == 0 else tab.grads
            nq = arr.shape[0]
            # arr: (nq, nloc, ncomp[, 2]) -> (nq, ncomp[, 2], nloc)
            arr = np.moveaxis(arr, 1, -1)
            per_cell = int(np.prod(arr.shape[:-1]))
            flat = arr.reshape(per_cell, -1)
            r = cells[:, None, None] * per_cell + np.arange(per_cell)[None, :, None]
            r = np.broadcast_to(r, (len(cells), per_cell, flat.shape[1]))
            cidx = np.broadcast_to(self.dofmap[cells][:, None, :], r.shape)
            v = np.broadcast_to(flat[None], r.shape)
            rows.append(r.ravel())
            cols.append(cidx.ravel())
            vals.append(v.ravel())
            del nq
        per_cell_total = len(self.quadrature(exactness)[1][0]) * ncomp * (2 if order else 1)
        shape = (nc * per_cell_total, self.dim)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
        )

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return f"FunctionSpace({self.name or self.element.family}, dim={self.dim})"
