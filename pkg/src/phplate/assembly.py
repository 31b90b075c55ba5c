"""Constitutive laws, discrete spaces and sparse assembly of M e' = J e + F.

Three schemes are provided:

``bjt``  Mindlin plate, strongly symmetric moments on square cells,
         fields (e_w, e_theta, E_kappa, e_gamma).
``afw``  Mindlin plate, weakly symmetric moments on triangles, fields
         (e_w, e_theta, E_kappa, e_gamma, E_r) with the skew multiplier E_r.
``hhj``  Kirchhoff plate, fields (e_w, E_kappa) with continuous e_w and
         normal-normal continuous E_kappa.

Tensors use the 4-component layout (xx, xy, yx, yy); the divergence of a
tensor is taken row by row, (Div U)_i = sum_j d_j U_ij, which is the adjoint
of grad(u)_ij = d_j u_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import elements as el
from .mesh import RectMesh, TriMesh
from .spaces import FunctionSpace, cell_groups

SCHEMES = ("bjt", "afw", "hhj")
SKEW_TOL = 1e-12

FIELDS = {
    "bjt": ("e_w", "e_theta", "E_kappa", "e_gamma"),
    "afw": ("e_w", "e_theta", "E_kappa", "e_gamma", "E_r"),
    "hhj": ("e_w", "E_kappa"),
}


class StructureError(RuntimeError):
    """Assembled matrices violate symmetry/skewness or definiteness."""


@dataclass(frozen=True)
class MaterialParams:
    E: float  # Young modulus [Pa]
    nu: float  # Poisson ratio
    rho: float  # density [kg/m^3]
    thickness: float  # [m]
    k_sc: float = 5.0 / 6.0  # shear correction

    def __post_init__(self):
        if not (self.E > 0 and self.rho > 0 and self.thickness > 0 and self.k_sc > 0):
            raise ValueError("E, rho, thickness and k_sc must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 1/2)")

    @property
    def bending_stiffness(self) -> float:
        """D0 = E b^3 / (12 (1 - nu^2))."""
        return self.E * self.thickness**3 / (12.0 * (1.0 - self.nu**2))

    @property
    def shear_stiffness(self) -> float:
        """E b k_sc / (2 (1 + nu))."""
        return self.E * self.thickness * self.k_sc / (2.0 * (1.0 + self.nu))

    @property
    def rho_b(self) -> float:
        return self.rho * self.thickness

    @property
    def rotary_inertia(self) -> float:
        return self.rho * self.thickness**3 / 12.0


MINDLIN_DEFAULTS = MaterialParams(E=1.0, nu=0.3, rho=1.0, thickness=0.1, k_sc=5.0 / 6.0)
KIRCHHOFF_DEFAULTS = MaterialParams(E=136e9, nu=0.3, rho=5600.0, thickness=1e-3, k_sc=5.0 / 6.0)


def default_params(scheme: str) -> MaterialParams:
    return KIRCHHOFF_DEFAULTS if scheme == "hhj" else MINDLIN_DEFAULTS


# --------------------------------------------------------------------------
# constitutive operators (act on the trailing 2x2 axes)


def constitutive_bending(K, p: MaterialParams):
    K = np.asarray(K, dtype=float)
    tr = np.trace(K, axis1=-2, axis2=-1)[..., None, None]
    return p.bending_stiffness * ((1.0 - p.nu) * K + p.nu * tr * np.eye(2))


def constitutive_bending_inverse(M, p: MaterialParams):
    M = np.asarray(M, dtype=float)
    tr = np.trace(M, axis1=-2, axis2=-1)[..., None, None]
    return (M - p.nu / (1.0 + p.nu) * tr * np.eye(2)) / (p.bending_stiffness * (1.0 - p.nu))


def constitutive_shear(g, p: MaterialParams):
    return p.shear_stiffness * np.asarray(g, dtype=float)


def constitutive_shear_inverse(q, p: MaterialParams):
    return np.asarray(q, dtype=float) / p.shear_stiffness


def bending_compliance_matrix(p: MaterialParams) -> np.ndarray:
    """D^{-1} as a 4x4 matrix on the (xx, xy, yx, yy) layout."""
    a = 1.0 / (p.bending_stiffness * (1.0 - p.nu))
    tr = np.array([1.0, 0.0, 0.0, 1.0])
    return a * (np.eye(4) - p.nu / (1.0 + p.nu) * np.outer(tr, tr))


# --------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class Field:
    name: str
    space: FunctionSpace
    offset: int

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.space.dim)


def scheme_elements(scheme: str, k: int) -> dict[str, el.Element]:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if k not in (1, 2, 3):
        raise ValueError(f"degree must be 1, 2 or 3, got {k}")
    if scheme == "bjt":
        dg = el.lagrange_element("square", k - 1, "discontinuous")
        return {
            "e_w": dg,
            "e_theta": el.vector_element(dg),
            "E_kappa": el.bjt_stress_element(k),
            "e_gamma": el.hdiv_q_element(k),
        }
    if scheme == "afw":
        dg = el.lagrange_element("triangle", k - 1, "discontinuous")
        return {
            "e_w": dg,
            "e_theta": el.vector_element(dg),
            "E_kappa": el.rowwise_element(el.bdm_element(k)),
            "e_gamma": el.raviart_thomas_element(k - 1),
            "E_r": el.skew_element(dg),
        }
    return {
        "e_w": el.lagrange_element("triangle", k, "continuous"),
        "E_kappa": el.hhj_element(k - 1),
    }


def build_spaces(scheme: str, mesh, k: int) -> list[Field]:
    """Ordered field layout with dof offsets."""
    if scheme == "bjt" and not isinstance(mesh, RectMesh):
        raise ValueError("the bjt scheme needs a RectMesh")
    if scheme in ("afw", "hhj") and not isinstance(mesh, TriMesh):
        raise ValueError(f"the {scheme} scheme needs a TriMesh")
    elems = scheme_elements(scheme, k)
    layout = []
    offset = 0
    for name in FIELDS[scheme]:
        space = FunctionSpace(mesh, elems[name], name)
        layout.append(Field(name, space, offset))
        offset += space.dim
    return layout


# --------------------------------------------------------------------------
# local forms: f(test_tab, trial_tab) -> (ni, nj)


def _mass(Q):
    def form(t, r):
        return np.einsum("q,qia,ab,qjb->ij", t.weights, t.values, Q, r.values)

    return form


def _scalar_div(t, r):
    div = r.grads[:, :, 0, 0] + r.grads[:, :, 1, 1]
    return np.einsum("q,qi,qj->ij", t.weights, t.values[:, :, 0], div)


def _tensor_div(t, r):
    g = r.grads  # (nq, nj, 4, 2)
    div = np.stack([g[:, :, 0, 0] + g[:, :, 1, 1], g[:, :, 2, 0] + g[:, :, 3, 1]], axis=-1)
    return np.einsum("q,qia,qja->ij", t.weights, t.values, div)


def assemble_form(test: FunctionSpace, trial: FunctionSpace, form, exactness: int, orders=(0, 0)):
    """Sum of a cellwise bilinear form over the mesh, as CSR (test x trial)."""
    groups = cell_groups(test.mesh)
    rows, cols, vals = [], [], []
    for g, cells in enumerate(groups.cells):
        L = form(test.tabulate(g, exactness, orders[0]), trial.tabulate(g, exactness, orders[1]))
        dt = test.dofmap[cells][:, :, None]
        dr = trial.dofmap[cells][:, None, :]
        shape = (len(cells),) + L.shape
        rows.append(np.broadcast_to(dt, shape).ravel())
        cols.append(np.broadcast_to(dr, shape).ravel())
        vals.append(np.broadcast_to(L[None], shape).ravel())
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(test.dim, trial.dim),
    )
    return A.tocsr()


def hhj_local_form(k: int, parts: str = "all"):
    """Local matrix of b_h(v, M) on one cell: -(hess v, M)_T + sum_e (d_n v, n.M.n)_e.

    ``parts`` selects "all", "volume" or "edges" (for consistency checks).
    """

    def form(space_w: FunctionSpace, space_m: FunctionSpace, g: int) -> np.ndarray:
        ex = 2 * k
        L = 0.0
        if parts in ("all", "volume"):
            t = space_w.tabulate(g, ex, 2)
            r = space_m.tabulate(g, ex, 0)
            hess = t.hess[:, :, 0].reshape(len(t.weights), -1, 4)  # (nq, ni, 4) xx xy yx yy
            L = L - np.einsum("q,qia,qja->ij", t.weights, hess, r.values)
        if parts in ("all", "edges"):
            ctx = space_w.groups.contexts[g]
            for e in range(ctx.nedges):
                t = space_w.tabulate(g, ex, 1, edge=e)
                r = space_m.tabulate(g, ex, 0, edge=e)
                a = ctx.vertices[e]
                b = ctx.vertices[(e + 1) % ctx.nedges]
                d = b - a
                n = np.array([d[1], -d[0]]) / np.linalg.norm(d)
                dn = t.grads[:, :, 0, :] @ n
                nn = r.values @ np.array([n[0] * n[0], n[0] * n[1], n[1] * n[0], n[1] * n[1]])
                L = L + np.einsum("q,qi,qj->ij", t.weights, dn, nn)
        return L

    return form


def assemble_hhj_coupling(space_w: FunctionSpace, space_m: FunctionSpace, k: int, parts="all"):
    groups = cell_groups(space_w.mesh)
    local = hhj_local_form(k, parts)
    rows, cols, vals = [], [], []
    for g, cells in enumerate(groups.cells):
        L = local(space_w, space_m, g)
        shape = (len(cells),) + L.shape
        rows.append(np.broadcast_to(space_w.dofmap[cells][:, :, None], shape).ravel())
        cols.append(np.broadcast_to(space_m.dofmap[cells][:, None, :], shape).ravel())
        vals.append(np.broadcast_to(L[None], shape).ravel())
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space_w.dim, space_m.dim),
    ).tocsr()


# --------------------------------------------------------------------------
# the port-Hamiltonian system


@dataclass
class PHSystem:
    scheme: str
    degree: int
    mesh: object
    params: MaterialParams
    fields: list[Field]
    M: sp.csr_matrix
    J: sp.csr_matrix
    free: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.free is None:
            self.free = np.arange(self.size)

    @property
    def size(self) -> int:
        return self.M.shape[0]

    def field(self, name: str) -> Field:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def M_free(self) -> sp.csr_matrix:
        return self.M[self.free][:, self.free].tocsr()

    @property
    def J_free(self) -> sp.csr_matrix:
        return self.J[self.free][:, self.free].tocsr()

    def expand(self, e_free: np.ndarray) -> np.ndarray:
        e = np.zeros(self.size)
        e[self.free] = e_free
        return e

    def split(self, e: np.ndarray) -> dict[str, np.ndarray]:
        """Per-field views of a full-length coefficient vector."""
        return {f.name: e[f.slice] for f in self.fields}

    def dof_counts(self) -> dict[str, int]:
        return {f.name: f.dim for f in self.fields}

    def multiplier_dofs(self) -> np.ndarray:
        """Free-vector indices of the weak-symmetry multiplier (empty unless afw)."""
        if self.scheme != "afw":
            return np.zeros(0, dtype=np.int64)
        f = self.field("E_r")
        pos = np.searchsorted(self.free, np.arange(f.offset, f.offset + f.dim))
        return pos

    def structure_residuals(self) -> dict[str, float]:
        M, J = self.M_free, self.J_free
        mmax = abs(M).max() or 1.0
        jmax = abs(J).max() or 1.0
        return {
            "symmetry": float(abs(M - M.T).max() / mmax),
            "skewness": float(abs(J + J.T).max() / jmax),
        }


def check_structure(system: PHSystem, tol: float = SKEW_TOL) -> dict[str, float]:
    res = system.structure_residuals()
    if res["skewness"] > tol:
        raise StructureError(f"J is not skew-symmetric: relative residual {res['skewness']:.3e}")
    if res["symmetry"] > tol:
        raise StructureError(f"M is not symmetric: relative residual {res['symmetry']:.3e}")
    return res


def assemble_system(scheme: str, mesh, k: int, params: MaterialParams | None = None) -> PHSystem:
    params = params or default_params(scheme)
    layout = build_spaces(scheme, mesh, k)
    F = {f.name: f for f in layout}
    n = len(layout)
    idx = {f.name: i for i, f in enumerate(layout)}
    ex = 2 * k
    Mb = [[None] * n for _ in range(n)]
    Ub = [[None] * n for _ in range(n)]

    def sp_of(name):
        return F[name].space

    def put(blocks, a, b, A):
        blocks[idx[a]][idx[b]] = A

    put(Mb, "e_w", "e_w", assemble_form(sp_of("e_w"), sp_of("e_w"), _mass(params.rho_b * np.eye(1)), ex))
    put(Mb, "E_kappa", "E_kappa", assemble_form(
        sp_of("E_kappa"), sp_of("E_kappa"), _mass(bending_compliance_matrix(params)), ex))

    if scheme in ("bjt", "afw"):
        w, th, kap, gam = (sp_of(s) for s in ("e_w", "e_theta", "E_kappa", "e_gamma"))
        put(Mb, "e_theta", "e_theta", assemble_form(th, th, _mass(params.rotary_inertia * np.eye(2)), ex))
        put(Mb, "e_gamma", "e_gamma", assemble_form(
            gam, gam, _mass(np.eye(2) / params.shear_stiffness), ex))
        # upper part of J; the lower part is minus its transpose
        put(Ub, "e_w", "e_gamma", assemble_form(w, gam, _scalar_div, ex, (0, 1)))
        put(Ub, "e_theta", "E_kappa", assemble_form(th, kap, _tensor_div, ex, (0, 1)))
        put(Ub, "e_theta", "e_gamma", assemble_form(th, gam, _mass(np.eye(2)), ex))
        if scheme == "afw":
            r = sp_of("E_r")
            C = assemble_form(kap, r, _mass(np.eye(4)), ex)
            put(Mb, "E_kappa", "E_r", C)
            put(Mb, "E_r", "E_kappa", C.T.tocsr())
    else:
        put(Ub, "e_w", "E_kappa", assemble_hhj_coupling(sp_of("e_w"), sp_of("E_kappa"), k))

    sizes = [f.dim for f in layout]
    for i in range(n):
        for j in range(n):
            if Mb[i][j] is None and i == j:
                Mb[i][j] = sp.csr_matrix((sizes[i], sizes[j]))
            if Ub[i][j] is None and i == j:
                Ub[i][j] = sp.csr_matrix((sizes[i], sizes[j]))
    M = sp.bmat(Mb, format="csr")
    U = sp.bmat(Ub, format="csr")
    J = (U - U.T).tocsr()
    M.sum_duplicates()
    J.sum_duplicates()
    M.eliminate_zeros()
    J.eliminate_zeros()
    system = PHSystem(scheme, k, mesh, params, layout, M, J)
    check_structure(system)
    return system


def apply_essential_bcs(system: PHSystem) -> PHSystem:
    """Restrict to free dofs.  Only the Kirchhoff scheme has essential
    conditions (e_w = 0 and m_nn = 0 on the boundary)."""
    if system.scheme != "hhj":
        return replace(system, free=np.arange(system.size))
    fixed = np.concatenate(
        [f.offset + f.space.boundary_dofs for f in system.fields]
    )
    free = np.setdiff1d(np.arange(system.size), fixed)
    return replace(system, free=free)


# --------------------------------------------------------------------------
# loads and projections


def load_exactness(k: int) -> int:
    return 2 * k + 4


def assemble_field_load(space: FunctionSpace, func, t: float, exactness: int) -> np.ndarray:
    """Vector (phi_i, func(., t)) for a callable func(x, y, t) -> (npts, ncomp)."""
    pts, w = space.quadrature(exactness)
    vals = np.asarray(func(pts[..., 0].ravel(), pts[..., 1].ravel(), t), dtype=float)
    vals = vals.reshape(w.size, space.element.ncomp) * w.reshape(-1, 1)
    return space.eval_matrix(exactness, 0).T @ vals.ravel()


def assemble_load(system: PHSystem, f=None, tau=None, t: float = 0.0, exactness: int | None = None):
    """Full-length load vector with (v_w, f) and (v_theta, tau) blocks."""
    ex = exactness or load_exactness(system.degree)
    out = np.zeros(system.size)
    if f is not None:
        fw = system.field("e_w")
        out[fw.slice] = assemble_field_load(fw.space, f, t, ex)
    if tau is not None and system.scheme != "hhj":
        ft = system.field("e_theta")
        out[ft.slice] = assemble_field_load(ft.space, tau, t, ex)
    return out


def mass_matrix(space: FunctionSpace, exactness: int | None = None) -> sp.csr_matrix:
    ex = exactness if exactness is not None else 2 * max(space.element.degree, 1) + 2
    return assemble_form(space, space, _mass(np.eye(space.element.ncomp)), ex)


def l2_project(space: FunctionSpace, func, t: float = 0.0, exactness: int | None = None,
               constrained: np.ndarray | None = None) -> np.ndarray:
    """L2 projection of func(x, y, t) onto ``space``.

    Dofs listed in ``constrained`` are held at zero.
    """
    import scipy.sparse.linalg as spla

    ex = exactness or (2 * max(space.element.degree, 1) + 4)
    Mm = mass_matrix(space, ex)
    b = assemble_field_load(space, func, t, ex)
    free = np.arange(space.dim)
    if constrained is not None and len(constrained):
        free = np.setdiff1d(free, constrained)
    c = np.zeros(space.dim)
    A = Mm[free][:, free].tocsc()
    lu = spla.splu(A)
    c[free] = lu.solve(b[free])
    if not np.all(np.isfinite(c)):
        raise np.linalg.LinAlgError(f"singular mass matrix for {space}")
    return c
