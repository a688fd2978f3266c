"""Sparse factorization and solves.

The direct path wraps SuperLU (``scipy.sparse.linalg.splu``) with a COLAMD
fill-reducing ordering and threshold partial pivoting. An iterative path
(MINRES for symmetric systems, GMRES otherwise) is available for very large
problems.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-14
RESIDUAL_TOL = 1e-10


class SingularMatrixError(ArithmeticError):
    pass


class SolverError(ArithmeticError):
    pass


def as_sparse(A) -> sp.csc_matrix:
    """Finalized compressed storage: duplicates summed, entries checked finite."""
    A = sp.csc_matrix(A, dtype=float)
    A.sum_duplicates()
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if not np.all(np.isfinite(A.data)):
        raise ValueError("matrix has non-finite entries")
    return A


@dataclass(eq=False)
class Factorization:
    """Reusable solver handle for a fixed matrix."""

    A: sp.csc_matrix
    method: str = "direct"
    _lu: object = None
    symmetric: bool = False
    tol: float = RESIDUAL_TOL

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return solve(self, b)


def factorize(A, method: str = "direct", symmetric: bool | None = None, tol: float = RESIDUAL_TOL) -> Factorization:
    """Factorize ``A``; raises :class:`SingularMatrixError` on a tiny pivot."""
    A = as_sparse(A)
    if symmetric is None:
        symmetric = abs(A - A.T).max() <= 1e-13 * max(abs(A).max(), 1.0) if A.nnz else True
    if method == "iterative":
        return Factorization(A, "iterative", None, bool(symmetric), tol)
    if method != "direct":
        raise ValueError(f"unknown solver method {method!r}")
    scale = abs(A).max() if A.nnz else 0.0
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() < PIVOT_TOL * scale:
        raise SingularMatrixError(f"pivot {pivots.min():.3e} below {PIVOT_TOL:g} x max entry {scale:.3e}")
    return Factorization(A, "direct", lu, bool(symmetric), tol)


def solve(F: Factorization, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n:
        raise ValueError(f"dimension mismatch: matrix {F.n}, rhs {b.shape[0]}")
    if not np.any(b):
        return np.zeros_like(b)
    if F.method == "direct":
        return F._lu.solve(b)
    n = F.n
    bnorm = max(np.linalg.norm(b), 1.0)
    rtol = 1e-3 * F.tol * bnorm / np.linalg.norm(b)
    x = np.zeros_like(b)
    for _ in range(5):  # restart from the current iterate if the true residual lags
        if F.symmetric:
            x, info = spla.minres(F.A, b, x0=x, rtol=rtol, maxiter=10 * n)
        else:
            x, info = spla.gmres(F.A, b, x0=x, rtol=rtol, maxiter=10 * n, restart=200)
        res = np.linalg.norm(F.A @ x - b) / bnorm
        if res <= F.tol:
            break
    if res > F.tol:
        raise SolverError(f"iterative solve did not converge (info={info}, residual={res:.2e})")
    return x


def relative_residual(A, x, b) -> float:
    return float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1.0))
