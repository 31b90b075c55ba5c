"""Quadrature rules on the reference interval, triangle and square.

Intervals and squares use Gauss-Legendre (tensor) rules.  Triangles use the
collapsed (Stroud conical product) Gauss-Jacobi rule, which is exact to any
requested degree at the cost of a few more points than the best symmetric
tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_EXACTNESS = 30


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def __len__(self) -> int:
        return len(self.weights)


def _gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def quad_rule(cell_kind: str, exactness: int) -> QuadRule:
    """Rule on the reference ``cell_kind`` exact for polynomials of degree
    ``exactness`` (total degree on triangles, per variable on squares).

    References: interval [0, 1], square [0, 1]^2, triangle (0,0),(1,0),(0,1).
    """
    d = int(exactness)
    if d < 0:
        raise ValueError("exactness must be non-negative")
    if d > MAX_EXACTNESS:
        raise ValueError(f"exactness {d} exceeds the supported ceiling {MAX_EXACTNESS}")
    m = d // 2 + 1
    if cell_kind == "interval":
        x, w = _gauss01(m)
        pts = x[:, None]
    elif cell_kind == "square":
        x, w = _gauss01(m)
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        w = np.outer(w, w).ravel()
    elif cell_kind == "triangle":
        # x = u, y = v (1 - u): the Jacobian (1 - u) is absorbed by Gauss-Jacobi(1, 0)
        a, wa = roots_jacobi(m, 1.0, 0.0)
        u = 0.5 * (a + 1.0)
        wu = wa / 4.0
        v, wv = _gauss01(m)
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
        w = np.outer(wu, wv).ravel()
    else:
        raise ValueError(f"unknown cell kind {cell_kind!r}")
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(points=pts, weights=w, exactness=d)


def map_rule(rule: QuadRule, geom) -> tuple[np.ndarray, np.ndarray]:
    """Physical points and weights of ``rule`` on a cell with affine ``geom``."""
    pts = geom.origin + rule.points @ geom.jacobian.T
    return pts, rule.weights * abs(geom.det)
