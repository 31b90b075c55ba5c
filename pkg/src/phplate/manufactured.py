"""Manufactured solutions, space-time error norms and convergence rates.

Mindlin: the static pair (w_s, theta_s) of a clamped square plate is made
dynamic by a factor sin(t); forcing terms follow by applying the governing
equations symbolically.  Kirchhoff: w = sin(pi x) sin(pi y) sin(t) for a
simply supported square plate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as s

from .assembly import MaterialParams, PHSystem, default_params

X, Y, T = s.symbols("x y t", real=True)


def _grad(u):
    return s.Matrix([u.diff(X), u.diff(Y)])


def _jac(v):
    """grad(v)_ij = d_j v_i."""
    return s.Matrix([[v[0].diff(X), v[0].diff(Y)], [v[1].diff(X), v[1].diff(Y)]])


def _sym(A):
    return (A + A.T) / 2


def _div(v):
    return v[0].diff(X) + v[1].diff(Y)


def _Div(A):
    """Row-wise divergence (Div A)_i = sum_j d_j A_ij."""
    return s.Matrix([A[0, 0].diff(X) + A[0, 1].diff(Y), A[1, 0].diff(X) + A[1, 1].diff(Y)])


def _bending(K, p):
    return p.D * ((1 - p.nu) * K + p.nu * K.trace() * s.eye(2))


@dataclass(frozen=True)
class _RationalParams:
    """Material constants as exact rationals, so that the symbolic forcing
    carries no rounding from float coefficient arithmetic."""

    E: s.Expr
    nu: s.Expr
    rho: s.Expr
    b: s.Expr
    k_sc: s.Expr

    @classmethod
    def of(cls, p: MaterialParams) -> "_RationalParams":
        q = lambda v: s.nsimplify(v, rational=True)
        return cls(q(p.E), q(p.nu), q(p.rho), q(p.thickness), q(p.k_sc))

    @property
    def D(self):
        return self.E * self.b**3 / (12 * (1 - self.nu**2))

    @property
    def C(self):
        return self.E * self.b * self.k_sc / (2 * (1 + self.nu))

    @property
    def rho_b(self):
        return self.rho * self.b

    @property
    def rotary_inertia(self):
        return self.rho * self.b**3 / 12


def _flat(expr) -> list:
    if isinstance(expr, s.MatrixBase):
        return list(expr)  # row-major: xx, xy, yx, yy or x, y
    return [expr]


def _vectorize(exprs: list) -> Callable:
    fn = s.lambdify((X, Y, T), exprs, modules="numpy")

    def f(x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vals = fn(x, y, t)
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in vals], axis=-1)

    return f


def _harmonic_split(exprs: list):
    """Write each expression as A(x, y) sin t + B(x, y) cos t, or return None."""
    sin_parts, cos_parts = [], []
    for e in exprs:
        e = s.expand(e)
        a = e.coeff(s.sin(T))
        b = e.coeff(s.cos(T))
        if a.has(T) or b.has(T) or s.simplify(e - a * s.sin(T) - b * s.cos(T)) != 0:
            return None
        sin_parts.append(a)
        cos_parts.append(b)
    return _vectorize(sin_parts), _vectorize(cos_parts)


class TimeHarmonic:
    """Evaluator f(x, y, t) = A(x, y) sin t + B(x, y) cos t with the spatial
    parts cached at a fixed point set."""

    def __init__(self, func, split, x, y):
        self.func = func
        self.x, self.y = x, y
        if split is None:
            self.parts = None
        else:
            self.parts = (split[0](x, y, 0.0), split[1](x, y, 0.0))

    def __call__(self, t: float) -> np.ndarray:
        if self.parts is None:
            return self.func(self.x, self.y, t)
        return self.parts[0] * np.sin(t) + self.parts[1] * np.cos(t)


@dataclass
class ExactSolution:
    """Closed-form co-energy fields and forcing of a test problem.

    ``expressions`` holds the sympy forms (fields, forcing and the
    displacements) so that independent checks can re-evaluate them.
    """

    model: str
    params: MaterialParams
    expressions: dict
    fields: dict[str, Callable] = field(default_factory=dict)
    gradients: dict[str, Callable] = field(default_factory=dict)
    f: Callable | None = None
    tau: Callable | None = None
    _splits: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        ex = self.expressions
        lists = {}
        for name in ("e_w", "e_theta", "E_kappa", "e_gamma", "E_r"):
            if name in ex:
                lists[name] = _flat(ex[name])
        lists["grad_e_w"] = list(_grad(ex["e_w"]))
        lists["f"] = [ex["f"]]
        if "tau" in ex:
            lists["tau"] = _flat(ex["tau"])
        funcs = {k: _vectorize(v) for k, v in lists.items()}
        for name in ("e_w", "e_theta", "E_kappa", "e_gamma", "E_r"):
            if name in funcs:
                self.fields[name] = funcs[name]
        self.gradients["e_w"] = funcs["grad_e_w"]
        self.f = funcs["f"]
        self.tau = funcs.get("tau")
        self._lists = lists

    def harmonic(self, name: str, x: np.ndarray, y: np.ndarray) -> TimeHarmonic:
        """Cached-in-space evaluator of a field, gradient ("grad_e_w") or
        forcing term ("f", "tau") at the points (x, y)."""
        if name not in self._splits:
            self._splits[name] = _harmonic_split(self._lists[name])
        func = {"grad_e_w": self.gradients["e_w"], "f": self.f, "tau": self.tau}.get(name)
        if func is None:
            func = self.fields[name]
        return TimeHarmonic(func, self._splits[name], x, y)



def mindlin_static(p: MaterialParams):
    r = _RationalParams.of(p)
    b, nu = r.b, r.nu
    c = 2 * b**2 / (5 * (1 - nu))
    ws = (
        s.Rational(1, 3) * X**3 * (X - 1) ** 3 * Y**3 * (Y - 1) ** 3
        - c
        * (
            Y**3 * (Y - 1) ** 3 * X * (X - 1) * (5 * X**2 - 5 * X + 1)
            + X**3 * (X - 1) ** 3 * Y * (Y - 1) * (5 * Y**2 - 5 * Y + 1)
        )
    )
    ths = s.Matrix(
        [
            Y**3 * (Y - 1) ** 3 * X**2 * (X - 1) ** 2 * (2 * X - 1),
            X**3 * (X - 1) ** 3 * Y**2 * (Y - 1) ** 2 * (2 * Y - 1),
        ]
    )
    return ws, ths


def printed_static_load(p: MaterialParams):
    """The static load as tabulated for this benchmark (thickness-scaled form)."""
    x, y = X, Y
    r = _RationalParams.of(p)
    return r.E / (12 * (1 - r.nu**2)) * (
        12 * y * (y - 1) * (5 * x**2 - 5 * x + 1) * (2 * y**2 * (y - 1) ** 2 + x * (x - 1) * (5 * y**2 - 5 * y + 1))
        + 12 * x * (x - 1) * (5 * y**2 - 5 * y + 1) * (2 * x**2 * (x - 1) ** 2 + y * (y - 1) * (5 * x**2 - 5 * x + 1))
    )


def mindlin_exact(p: MaterialParams | None = None) -> ExactSolution:
    p = p or default_params("bjt")
    r = _RationalParams.of(p)
    ws, ths = mindlin_static(p)
    w = ws * s.sin(T)
    th = ths * s.sin(T)
    E_kappa = _bending(_sym(_jac(th)), r)
    e_gamma = r.C * (_grad(w) - th)
    rot = (_jac(th) - _jac(th).T) / 2
    f = r.rho_b * w.diff(T, 2) - _div(e_gamma)
    tau = r.rotary_inertia * th.diff(T, 2) - e_gamma - _Div(E_kappa)
    ex = {
        "w": w,
        "theta": th,
        "e_w": w.diff(T),
        "e_theta": th.diff(T),
        "E_kappa": E_kappa,
        "e_gamma": e_gamma,
        "E_r": rot,
        "f": s.expand(f),
        "tau": tau.applyfunc(s.expand),
    }
    return ExactSolution("mindlin", p, ex)


def kirchhoff_exact(p: MaterialParams | None = None) -> ExactSolution:
    p = p or default_params("hhj")
    r = _RationalParams.of(p)
    w = s.sin(s.pi * X) * s.sin(s.pi * Y) * s.sin(T)
    E_kappa = _bending(_jac(_grad(w)), r)
    f = r.rho_b * w.diff(T, 2) + _div(_Div(E_kappa))
    ex = {"w": w, "e_w": w.diff(T), "E_kappa": E_kappa, "f": s.simplify(f)}
    return ExactSolution("kirchhoff", p, ex)


def exact_for(scheme: str, params: MaterialParams | None = None) -> ExactSolution:
    params = params or default_params(scheme)
    return kirchhoff_exact(params) if scheme == "hhj" else mindlin_exact(params)


# --------------------------------------------------------------------------
# error norms

NORMS = {
    "bjt": {"e_w": "L2", "e_theta": "L2", "E_kappa": "L2", "e_gamma": "L2"},
    "afw": {"e_w": "L2", "e_theta": "L2", "E_kappa": "L2", "e_gamma": "L2", "E_r": "L2"},
    "hhj": {"e_w": "H1", "E_kappa": "L2"},
}


class ErrorEvaluator:
    """Spatial error norms of a discrete state at one time instant.

    Uses the elevated quadrature rule; L2 for vector/tensor fields is the
    pointwise Euclidean/Frobenius norm integrated over the domain, and H1 is
    the full norm (value plus gradient) of a conforming field.
    """

    def __init__(self, system: PHSystem, exact: ExactSolution, exactness: int | None = None):
        from .assembly import load_exactness

        self.system = system
        self.exact = exact
        self.exactness = exactness or load_exactness(system.degree)
        self.norms = NORMS[system.scheme]
        self._data = {}
        for name, kind in self.norms.items():
            if name not in exact.fields:
                continue
            fld = system.field(name)
            pts, w = fld.space.quadrature(self.exactness)
            xs, ys = pts[..., 0].ravel(), pts[..., 1].ravel()
            Phi = fld.space.eval_matrix(self.exactness, 0)
            val = exact.harmonic(name, xs, ys)
            grad = None
            if kind == "H1":
                grad = (fld.space.eval_matrix(self.exactness, 1), exact.harmonic("grad_" + name, xs, ys))
            self._data[name] = (fld, w.ravel(), Phi, val, grad)

    def __call__(self, t: float, e_full: np.ndarray) -> dict[str, float]:
        out = {}
        for name, (fld, w, Phi, val, grad) in self._data.items():
            c = e_full[fld.slice]
            ncomp = fld.space.element.ncomp
            diff = (Phi @ c).reshape(-1, ncomp) - val(t).reshape(-1, ncomp)
            sq = np.sum(w * np.sum(diff**2, axis=1))
            if grad is not None:
                dPhi, gval = grad
                g = (dPhi @ c).reshape(-1, 2) - gval(t).reshape(-1, 2)
                sq += np.sum(w * np.sum(g**2, axis=1))
            out[name] = float(np.sqrt(max(sq, 0.0)))
        return out


def error_norms(times, states_full, exact: ExactSolution, system: PHSystem,
                evaluator: ErrorEvaluator | None = None) -> dict[str, float]:
    """Discrete L-infinity-in-time norms: max over the time levels."""
    ev = evaluator or ErrorEvaluator(system, exact)
    worst: dict[str, float] = {}
    for t, e in zip(times, states_full):
        for k, v in ev(t, e).items():
            worst[k] = max(worst.get(k, 0.0), v)
    return worst


@dataclass
class Rates:
    h: np.ndarray
    errors: np.ndarray
    successive: np.ndarray
    slope: float  # least squares over all levels
    slope_finest3: float  # least squares over the three finest levels


def _lsq_slope(h, e) -> float:
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def convergence_rates(data) -> Rates:
    """Rates from (h, error) pairs; rows are sorted by decreasing h."""
    data = sorted(((float(h), float(e)) for h, e in data), key=lambda r: -r[0])
    if len(data) < 2:
        raise ValueError("need at least two mesh levels")
    h = np.array([d[0] for d in data])
    e = np.array([d[1] for d in data])
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    succ = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    tail = slice(max(0, len(h) - 3), len(h))
    return Rates(h, e, succ, _lsq_slope(h, e), _lsq_slope(h[tail], e[tail]))
