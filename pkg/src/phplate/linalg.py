"""Sparse LU factorization wrapper and inertia counting.

Factorizations are delegated to SuperLU (``scipy.sparse.linalg.splu``) with a
COLAMD fill-reducing column order and threshold partial pivoting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PIVOT_TOL = 1e-14
RESIDUAL_TOL = 1e-9


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class SolverResidualError(RuntimeError):
    pass


def as_csr(A) -> sp.csr_matrix:
    """Compressed-row copy with sorted, summed column indices."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass
class Factorization:
    lu: spla.SuperLU
    A: sp.csr_matrix
    n: int

    @property
    def perm_r(self) -> np.ndarray:
        return self.lu.perm_r

    @property
    def perm_c(self) -> np.ndarray:
        return self.lu.perm_c

    @property
    def L(self):
        return self.lu.L

    @property
    def U(self):
        return self.lu.U

    def reconstruction_residual(self) -> float:
        """max |Pr A Pc - L U| / max |A|."""
        n = self.n
        Pr = sp.csc_matrix((np.ones(n), (self.perm_r, np.arange(n))), shape=(n, n))
        Pc = sp.csc_matrix((np.ones(n), (np.arange(n), self.perm_c)), shape=(n, n))
        R = Pr @ self.A @ Pc - self.L @ self.U
        amax = abs(self.A).max()
        return float(abs(R).max() / amax) if R.nnz else 0.0

    def solve(self, b):
        return solve(self, b)


def lu_factor(A, options: dict | None = None) -> Factorization:
    A = as_csr(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    amax = abs(A).max() if A.nnz else 0.0
    if amax == 0.0:
        raise SingularMatrixError("zero matrix")
    try:
        lu = spla.splu(A.tocsc(), **(options or {}))
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() <= PIVOT_TOL * amax:
        raise SingularMatrixError(
            f"pivot {piv.min():.3e} below {PIVOT_TOL:g} * max|A| = {PIVOT_TOL * amax:.3e}"
        )
    return Factorization(lu, A, n)


def solve(F: Factorization, b, check: bool = True, tol: float = RESIDUAL_TOL) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n:
        raise ValueError(f"right-hand side has length {b.shape[0]}, matrix has {F.n} rows")
    x = F.lu.solve(b)
    if check:
        r = relative_residual(F.A, x, b)
        if r > tol:
            raise SolverResidualError(f"relative residual {r:.3e} exceeds {tol:g}")
    return x


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(A @ x - b) / nb)


def _symmetric_ldl_signs(A: sp.csr_matrix, order: np.ndarray) -> np.ndarray | None:
    """Diagonal pivots of a symmetric elimination of A in the given order.

    Returns None when SuperLU deviated from diagonal pivoting.
    """
    P = A[order][:, order].tocsc()
    try:
        lu = spla.splu(
            P,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return None
    if not np.array_equal(lu.perm_r, np.arange(P.shape[0])):
        return None
    return lu.U.diagonal()


def inertia(A, last: np.ndarray | None = None) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts of a symmetric matrix.

    Uses Sylvester's law on a symmetric (diagonally pivoted) elimination.
    Indices in ``last`` are eliminated after all others, which keeps the
    elimination well defined for saddle-point matrices whose zero block
    belongs to those indices.  Falls back to a dense eigenvalue count when
    the sparse elimination breaks down.
    """
    A = _equilibrate(as_csr(A))
    n = A.shape[0]
    last = np.zeros(0, dtype=np.int64) if last is None else np.asarray(last)
    first = np.setdiff1d(np.arange(n), last)
    order = np.concatenate([_rcm(A, first), _rcm(A, last)])
    d = _symmetric_ldl_signs(A, order)
    scale = abs(A).max()
    if d is None or np.min(np.abs(d)) <= 1e-13 * scale:
        ev = np.linalg.eigvalsh(A.toarray())
        tol = 1e-12 * np.max(np.abs(ev))
        return int(np.sum(ev > tol)), int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol))
    return int(np.sum(d > 0)), int(np.sum(d < 0)), 0


def _equilibrate(A: sp.csr_matrix) -> sp.csr_matrix:
    """Symmetric diagonal scaling S A S (a congruence, so inertia is kept)."""
    d = np.abs(A.diagonal())
    rowmax = np.asarray(abs(A).max(axis=1).todense()).ravel()
    d = np.where(d > 0, d, rowmax)
    d = np.where(d > 0, d, 1.0)
    S = sp.diags(1.0 / np.sqrt(d))
    return (S @ A @ S).tocsr()


def _rcm(A: sp.csr_matrix, idx: np.ndarray) -> np.ndarray:
    from scipy.sparse.csgraph import reverse_cuthill_mckee

    if len(idx) <= 2:
        return idx
    sub = A[idx][:, idx]
    sub = (abs(sub) + abs(sub.T)).tocsr()
    perm = reverse_cuthill_mckee(sub, symmetric_mode=True)
    return idx[perm]


def is_positive_definite(A) -> bool:
    pos, neg, zero = inertia(A)
    return neg == 0 and zero == 0
