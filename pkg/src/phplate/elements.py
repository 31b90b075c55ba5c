"""Finite elements built directly on physical (affine) cells.

An element is a polynomial "prime" space plus an ordered list of degree-of-
freedom functionals.  Functionals on shared mesh entities are defined with the
global edge orientation and the global edge normal, so two neighbouring cells
evaluate exactly the same functional and gluing by shared dofs enforces the
advertised inter-cell continuity.  The nodal basis on a cell is the dual of
its functionals, obtained by inverting the generalized Vandermonde matrix.

Polynomials are written in scaled local coordinates ``X = (x - c) / s`` with
``c`` the cell centroid and ``s`` the mesh size, which keeps the Vandermonde
matrices well conditioned on fine meshes.

Value layouts: scalar (1 component), vector (2: x, y) and tensor (4: xx, xy,
yx, yy).  Symmetric and skew tensors use the full tensor layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre

from .quadrature import quad_rule

NCOMP = {"scalar": 1, "vector": 2, "tensor": 4}
MAX_DEGREE = 4  # per-variable monomial degree covered by the prime tables
SUPPORTED_DERIVATIVES = 2

_REF_VERTICES = {
    "triangle": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    "square": np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
}


# --------------------------------------------------------------------------
# polynomial tables


def _exponents(cell_kind: str, k: int) -> list[tuple[int, int]]:
    if k < 0:
        return []
    if cell_kind == "triangle":
        return [(a, d - a) for d in range(k + 1) for a in range(d, -1, -1)]
    return [(a, b) for b in range(k + 1) for a in range(k + 1)]


def _homogeneous(k: int) -> list[tuple[int, int]]:
    return [(a, k - a) for a in range(k, -1, -1)]


def _poly(ncomp: int) -> np.ndarray:
    return np.zeros((ncomp, MAX_DEGREE + 1, MAX_DEGREE + 1))


def scalar_polys(exps) -> np.ndarray:
    out = np.zeros((len(exps), 1, MAX_DEGREE + 1, MAX_DEGREE + 1))
    for i, (a, b) in enumerate(exps):
        out[i, 0, a, b] = 1.0
    return out


def _vector_polys(exps) -> np.ndarray:
    out = []
    for c in range(2):
        for a, b in exps:
            p = _poly(2)
            p[c, a, b] = 1.0
            out.append(p)
    return np.array(out).reshape(-1, 2, MAX_DEGREE + 1, MAX_DEGREE + 1)


def _monomials(X: np.ndarray, order: int):
    """Tables of x^a y^b and their derivatives at points X (npts, 2)."""
    D = MAX_DEGREE
    a = np.arange(D + 1)
    x = X[:, 0:1]
    y = X[:, 1:2]

    def powers(t):
        p0 = t ** a
        p1 = np.where(a >= 1, a * t ** np.maximum(a - 1, 0), 0.0)
        p2 = np.where(a >= 2, a * (a - 1) * t ** np.maximum(a - 2, 0), 0.0)
        return p0, p1, p2

    px, dpx, ddpx = powers(x)
    py, dpy, ddpy = powers(y)
    tabs = {(0, 0): np.einsum("pa,pb->pab", px, py)}
    if order >= 1:
        tabs[(1, 0)] = np.einsum("pa,pb->pab", dpx, py)
        tabs[(0, 1)] = np.einsum("pa,pb->pab", px, dpy)
    if order >= 2:
        tabs[(2, 0)] = np.einsum("pa,pb->pab", ddpx, py)
        tabs[(1, 1)] = np.einsum("pa,pb->pab", dpx, dpy)
        tabs[(0, 2)] = np.einsum("pa,pb->pab", px, ddpy)
    return tabs


def eval_polys(coeffs: np.ndarray, X: np.ndarray, order: int = 0):
    """Values, gradients and Hessians (w.r.t. X) of polynomials at X.

    Returns arrays shaped (npts, npoly, ncomp), (.., 2), (.., 2, 2); the
    derivative arrays are ``None`` when not requested.
    """
    tabs = _monomials(np.atleast_2d(X), order)
    ev = lambda key: np.einsum("icab,pab->pic", coeffs, tabs[key])
    vals = ev((0, 0))
    grads = hess = None
    if order >= 1:
        grads = np.stack([ev((1, 0)), ev((0, 1))], axis=-1)
    if order >= 2:
        hxy = ev((1, 1))
        hess = np.stack(
            [np.stack([ev((2, 0)), hxy], -1), np.stack([hxy, ev((0, 2))], -1)], axis=-2
        )
    return vals, grads, hess


# --------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class Functional:
    """dof(v) = sum_q sum_c weights[q, c] * v_c(points[q])."""

    entity: tuple[str, int]  # ("vertex"|"edge"|"cell", local index)
    key: tuple  # distinguishes functionals on the same entity
    points: np.ndarray
    weights: np.ndarray
    continuity: str

    def __call__(self, func) -> float:
        vals = np.asarray(func(self.points)).reshape(len(self.points), -1)
        return float(np.sum(self.weights * vals))


@dataclass(frozen=True)
class CellContext:
    """Local cell description in scaled coordinates.

    ``direction[i]`` is +1 when the global tangent of local edge i runs from
    local vertex i to i+1; ``normal_sign[i]`` is +1 when the global normal of
    local edge i is this cell's outward normal.
    """

    cell_kind: str
    vertices: np.ndarray
    direction: tuple[int, ...]
    normal_sign: tuple[int, ...]

    @property
    def nedges(self) -> int:
        return len(self.vertices)

    def edge(self, i: int):
        """Global start point, global end point, global unit normal."""
        a = self.vertices[i]
        b = self.vertices[(i + 1) % self.nedges]
        d = b - a
        outward = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        if self.direction[i] < 0:
            a, b = b, a
        return a, b, self.normal_sign[i] * outward

    @cached_property
    def jacobian(self) -> np.ndarray:
        v = self.vertices
        if self.cell_kind == "triangle":
            return np.column_stack([v[1] - v[0], v[2] - v[0]])
        return np.column_stack([v[1] - v[0], v[3] - v[0]])

    @property
    def measure(self) -> float:
        det = abs(np.linalg.det(self.jacobian))
        return 0.5 * det if self.cell_kind == "triangle" else det

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        return self.vertices[0] + ref_points @ self.jacobian.T

    def interior_rule(self, exactness: int):
        rule = quad_rule(self.cell_kind, exactness)
        return self.map_points(rule.points), rule.weights / rule.weights.sum()


def reference_context(cell_kind: str) -> CellContext:
    v = _REF_VERTICES[cell_kind]
    n = len(v)
    direction = tuple(1 if i < (i + 1) % n else -1 for i in range(n))
    return CellContext(cell_kind, v.copy(), direction, (1,) * n)


def _edge_moments(ctx, i, degree, comp_weight, continuity, tag=()):
    """Moments of comp_weight(n) . v against Legendre polynomials along edge i."""
    rule = quad_rule("interval", 2 * degree + 2 * MAX_DEGREE)
    s = rule.points[:, 0]
    a, b, n = ctx.edge(i)
    pts = a + s[:, None] * (b - a)
    cw = comp_weight(n)
    out = []
    for j in range(degree + 1):
        q = legendre.legval(2 * s - 1, np.eye(degree + 1)[j])
        w = (rule.weights * q)[:, None] * cw[None, :]
        out.append(Functional(("edge", i), tag + (j,), pts, w, continuity))
    return out


def _interior_moments(ctx, tests: np.ndarray, tag=()):
    """Normalized cell moments against the polynomial fields ``tests``."""
    pts, w = ctx.interior_rule(2 * MAX_DEGREE + 2)
    vals, _, _ = eval_polys(tests, pts - ctx.vertices.mean(axis=0))
    return [
        Functional(("cell", 0), tag + (j,), pts, w[:, None] * vals[:, j, :], "discontinuous")
        for j in range(len(tests))
    ]


# --------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class Element:
    """Reference description of a finite element family member.

    Subclasses provide the prime polynomial space (in coordinates centred at
    the cell centroid) and the functionals for a given ``CellContext``.
    """

    family: str
    cell_kind: str
    value_shape: str
    degree: int
    continuity: str
    prime: np.ndarray = field(repr=False, compare=False)
    _functionals: object = field(repr=False, compare=False)

    @property
    def ncomp(self) -> int:
        return NCOMP[self.value_shape]

    @property
    def dim(self) -> int:
        return len(self.prime)

    def functionals(self, ctx: CellContext) -> list[Functional]:
        fs = self._functionals(ctx)
        if len(fs) != self.dim:
            raise RuntimeError(f"{self.family}: {len(fs)} functionals for dimension {self.dim}")
        return fs

    def on_cell(self, ctx: CellContext) -> "CellBasis":
        return CellBasis(self, ctx)

    def reference(self) -> "CellBasis":
        return CellBasis(self, reference_context(self.cell_kind))


class CellBasis:
    """Nodal basis of an element on one concrete cell.

    ``scale`` converts derivatives with respect to the context coordinates
    into physical derivatives (physical length per context length unit).
    """

    def __init__(self, element: Element, ctx: CellContext, scale: float = 1.0):
        self.element = element
        self.ctx = ctx
        self.scale = scale
        self.center = ctx.vertices.mean(axis=0)
        self.functionals = element.functionals(ctx)
        V = np.array([self._apply(f, element.prime) for f in self.functionals])
        cond = np.linalg.cond(V)
        if not np.isfinite(cond) or cond > 1e12:
            raise np.linalg.LinAlgError(
                f"{element.family} degree {element.degree}: dof matrix is singular (cond={cond:.3g})"
            )
        self.vandermonde = V
        self.coeffs = np.linalg.solve(V, np.eye(len(V))).T  # rows: basis in prime coords

    def _apply(self, f: Functional, polys: np.ndarray) -> np.ndarray:
        vals, _, _ = eval_polys(polys, f.points - self.center)
        return np.einsum("qc,qic->i", f.weights, vals)

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def evaluate(self, X: np.ndarray, order: int = 0):
        """Basis values/derivatives at context points X.

        Shapes: (npts, nbasis, ncomp), (.., 2), (.., 2, 2).
        """
        if order > SUPPORTED_DERIVATIVES:
            raise ValueError(f"derivative order {order} not supported (max {SUPPORTED_DERIVATIVES})")
        v, g, h = eval_polys(self.element.prime, np.atleast_2d(X) - self.center, order)
        C = self.coeffs
        vals = np.einsum("ij,pjc->pic", C, v)
        grads = None if g is None else np.einsum("ij,pjcd->picd", C, g) / self.scale
        hess = None if h is None else np.einsum("ij,pjcde->picde", C, h) / self.scale**2
        return vals, grads, hess

    def dof_values(self, func) -> np.ndarray:
        """Apply every functional to ``func`` (a callable of context points)."""
        return np.array([f(func) for f in self.functionals])

    def interpolate(self, func):
        """Coefficients of the interpolant of ``func`` in this basis."""
        return self.dof_values(func)


# ---- component lifting ----------------------------------------------------


def _lift(sub_prime, P):
    """Map polynomial components through P (ncomp_out x ncomp_in)."""
    return np.einsum("oc,icab->ioab", P, sub_prime)


def _lift_functionals(fs, R, tag):
    return [
        Functional(f.entity, (tag,) + f.key, f.points, f.weights @ R.T, f.continuity)
        for f in fs
    ]


def _compose(family, cell_kind, value_shape, degree, continuity, parts):
    """Direct sum of sub-elements; parts = [(element, P, R)] with R^T P = I."""
    prime = np.concatenate([_lift(e.prime, P) for e, P, _ in parts])

    def functionals(ctx):
        out = []
        for tag, (e, _, R) in enumerate(parts):
            out += _lift_functionals(e.functionals(ctx), R, tag)
        return out

    return Element(family, cell_kind, value_shape, degree, continuity, prime, functionals)


_E = np.eye(4)
TENSOR_XX, TENSOR_XY, TENSOR_YX, TENSOR_YY = range(4)


# ---- Lagrange -------------------------------------------------------------


def _lattice(ctx: CellContext, k: int, continuous: bool):
    """Lagrange nodes with their entity; edge nodes follow the global direction."""
    if k == 0:
        return [(("cell", 0), (0,), ctx.vertices.mean(axis=0))]
    nodes = []
    for i, v in enumerate(ctx.vertices):
        nodes.append((("vertex", i), (0,), v))
    for i in range(ctx.nedges):
        a, b, _ = ctx.edge(i)
        for j in range(1, k):
            nodes.append((("edge", i), (j,), a + (j / k) * (b - a)))
    v = ctx.vertices
    j = 0
    if ctx.cell_kind == "triangle":
        for p in range(1, k):
            for q in range(1, k - p):
                nodes.append((("cell", 0), (j,), v[0] + (p / k) * (v[1] - v[0]) + (q / k) * (v[2] - v[0])))
                j += 1
    else:
        for q in range(1, k):
            for p in range(1, k):
                nodes.append((("cell", 0), (j,), v[0] + (p / k) * (v[1] - v[0]) + (q / k) * (v[3] - v[0])))
                j += 1
    if not continuous:
        nodes = [(("cell", 0), (m,), x) for m, (_, _, x) in enumerate(nodes)]
    return nodes


def lagrange_element(cell_kind: str, k: int, continuity: str = "continuous") -> Element:
    """P_k on triangles, tensor-product Q_k on squares."""
    if continuity not in ("continuous", "discontinuous"):
        raise ValueError(f"unknown continuity {continuity!r}")
    continuous = continuity == "continuous"
    if k < 0 or (continuous and k == 0):
        raise ValueError(f"invalid Lagrange degree {k} for {continuity} element")
    if k > 3:
        raise ValueError("Lagrange degree above 3 not supported")
    prime = scalar_polys(_exponents(cell_kind, k))
    cls = "C0" if continuous else "discontinuous"

    def functionals(ctx):
        return [
            Functional(ent, key, x[None, :], np.ones((1, 1)), cls if ent[0] != "cell" else "discontinuous")
            for ent, key, x in _lattice(ctx, k, continuous)
        ]

    return Element(f"Lagrange{'' if continuous else '-DG'}", cell_kind, "scalar", k, cls, prime, functionals)


def vector_element(scalar: Element) -> Element:
    """Two independent copies of a scalar element as a vector field."""
    parts = [(scalar, _E[:2, c : c + 1], _E[:2, c : c + 1]) for c in range(2)]
    return _compose(f"Vector{scalar.family}", scalar.cell_kind, "vector", scalar.degree, scalar.continuity, parts)


def skew_element(scalar: Element) -> Element:
    """Skew tensors r * [[0, 1], [-1, 0]] with r in a scalar space."""
    P = np.array([[0.0], [1.0], [-1.0], [0.0]])
    R = np.array([[0.0], [1.0], [0.0], [0.0]])
    return _compose(f"Skew{scalar.family}", scalar.cell_kind, "tensor", scalar.degree, scalar.continuity, [(scalar, P, R)])


def rowwise_element(vector: Element) -> Element:
    """Full tensors whose two rows each lie in a vector element."""
    parts = [
        (vector, _E[:, [0, 1]], _E[:, [0, 1]]),
        (vector, _E[:, [2, 3]], _E[:, [2, 3]]),
    ]
    return _compose(f"Rowwise{vector.family}", vector.cell_kind, "tensor", vector.degree, vector.continuity, parts)


# ---- H(div) families on triangles -----------------------------------------


def _normal_weight(n):
    return n


def raviart_thomas_element(r: int) -> Element:
    """RT_r on triangles: (P_r)^2 + x P~_r, dimension (r+1)(r+3)."""
    if r < 0:
        raise ValueError("Raviart-Thomas order must be non-negative")
    if r > 2:
        raise ValueError("Raviart-Thomas order above 2 not supported")
    base = _vector_polys(_exponents("triangle", r))
    extra = []
    for a, b in _homogeneous(r):
        p = _poly(2)
        p[0, a + 1, b] = 1.0
        p[1, a, b + 1] = 1.0
        extra.append(p)
    prime = np.concatenate([base, np.array(extra)])
    tests = _vector_polys(_exponents("triangle", r - 1))

    def functionals(ctx):
        fs = []
        for i in range(3):
            fs += _edge_moments(ctx, i, r, _normal_weight, "normal-trace")
        return fs + _interior_moments(ctx, tests)

    return Element("RT", "triangle", "vector", r, "normal-trace", prime, functionals)


def _nedelec_first_kind(r: int) -> np.ndarray:
    """(P_r)^2 + x^perp P~_r, used as interior test space of BDM_{r+1}."""
    if r < 0:
        return np.zeros((0, 2, MAX_DEGREE + 1, MAX_DEGREE + 1))
    base = _vector_polys(_exponents("triangle", r))
    extra = []
    for a, b in _homogeneous(r):
        p = _poly(2)
        p[0, a, b + 1] = -1.0
        p[1, a + 1, b] = 1.0
        extra.append(p)
    return np.concatenate([base, np.array(extra)])


def bdm_element(r: int) -> Element:
    """BDM_r on triangles: full (P_r)^2, dimension (r+1)(r+2)."""
    if r < 1:
        raise ValueError("BDM order must be at least 1")
    if r > 3:
        raise ValueError("BDM order above 3 not supported")
    prime = _vector_polys(_exponents("triangle", r))
    tests = _nedelec_first_kind(r - 2)

    def functionals(ctx):
        fs = []
        for i in range(3):
            fs += _edge_moments(ctx, i, r, _normal_weight, "normal-trace")
        return fs + _interior_moments(ctx, tests)

    return Element("BDM", "triangle", "vector", r, "normal-trace", prime, functionals)


# ---- HHJ ------------------------------------------------------------------

_SYM = np.array([[1.0, 0, 0, 0], [0, 1.0, 1.0, 0], [0, 0, 0, 1.0]])  # xx, (xy+yx), yy


def _symmetric_polys(exps) -> np.ndarray:
    out = []
    for S in _SYM:
        for a, b in exps:
            p = _poly(4)
            p[:, a, b] = S
            out.append(p)
    return np.array(out).reshape(-1, 4, MAX_DEGREE + 1, MAX_DEGREE + 1)


def _nn_weight(n):
    return np.array([n[0] * n[0], n[0] * n[1], n[1] * n[0], n[1] * n[1]])


def hhj_element(r: int) -> Element:
    """Symmetric P_r tensors with normal-normal continuity."""
    if r < 0:
        raise ValueError("HHJ order must be non-negative")
    if r > 2:
        raise ValueError("HHJ order above 2 not supported")
    prime = _symmetric_polys(_exponents("triangle", r))
    tests = _symmetric_polys(_exponents("triangle", r - 1))

    def functionals(ctx):
        fs = []
        for i in range(3):
            fs += _edge_moments(ctx, i, r, _nn_weight, "normal-normal-trace")
        return fs + _interior_moments(ctx, tests)

    return Element("HHJ", "triangle", "tensor", r, "normal-normal-trace", prime, functionals)


# ---- square families --------------------------------------------------------


def hdiv_q_element(k: int) -> Element:
    """Vector fields in (Q_k)^2 with continuous normal component (squares)."""
    if k < 1:
        raise ValueError("degree must be at least 1")
    if k > 3:
        raise ValueError("degree above 3 not supported")
    prime = _vector_polys(_exponents("square", k))
    # x-component against P_{k-2}(x) P_k(y), y-component against P_k(x) P_{k-2}(y)
    ex = [(a, b) for b in range(k + 1) for a in range(k - 1)]
    ey = [(a, b) for b in range(k - 1) for a in range(k + 1)]
    tests = np.concatenate([_vector_polys(ex)[: len(ex)], _vector_polys(ey)[len(ey) :]])

    def functionals(ctx):
        fs = []
        for i in range(4):
            fs += _edge_moments(ctx, i, k, _normal_weight, "normal-trace")
        return fs + _interior_moments(ctx, tests)

    return Element("HdivQ", "square", "vector", k, "normal-trace", prime, functionals)


def bjt_stress_element(k: int) -> Element:
    """Symmetric tensors on squares: m12 in continuous Q_k, (m11, m22) in
    ``hdiv_q_element(k)`` (normal continuity)."""
    if k < 1:
        raise ValueError("BJT degree must be at least 1")
    m12 = lagrange_element("square", k, "continuous")
    diag = hdiv_q_element(k)
    P12 = np.array([[0.0], [1.0], [1.0], [0.0]])
    R12 = np.array([[0.0], [1.0], [0.0], [0.0]])
    Pd = _E[:, [0, 3]]
    return _compose("BJT", "square", "tensor", k, "mixed", [(diag, Pd, Pd), (m12, P12, R12)])


# --------------------------------------------------------------------------
# tabulation on the reference cell


def tabulate(element: Element, points, derivative_order: int = 0) -> np.ndarray:
    """Reference-cell basis table of shape (npts, nbasis, ncomp, nderiv).

    The last axis lists the value, then (d/dx, d/dy) for order >= 1, then
    (d2/dx2, d2/dxdy, d2/dy2) for order 2.
    """
    if derivative_order > SUPPORTED_DERIVATIVES or derivative_order < 0:
        raise ValueError(f"derivative order must be in [0, {SUPPORTED_DERIVATIVES}]")
    basis = element.reference()
    v, g, h = basis.evaluate(np.asarray(points, dtype=float), derivative_order)
    cols = [v]
    if derivative_order >= 1:
        cols += [g[..., 0], g[..., 1]]
    if derivative_order >= 2:
        cols += [h[..., 0, 0], h[..., 0, 1], h[..., 1, 1]]
    return np.stack(cols, axis=-1)
