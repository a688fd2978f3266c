"""Zero-mean pressure Poisson solve through a bordered (augmented) system.

``[[K, r], [r^T, 0]] [P; c] = [F; 0]``. With ``constraint="mass"`` (default)
``r_i = int phi_i dV`` so that ``r^T P = int p_h dV = 0``; with
``constraint="ones"`` ``r`` is the all-ones kernel vector of ``K``.

Because ``K`` is symmetric with kernel spanned by the all-ones vector ``e``,
left-multiplying the first block row by ``e^T`` gives
``c = (e^T F) / (e^T r)``, which reduces to ``(r^T F) / (r^T r)`` when
``r = e``. In both cases ``K P = F - c r`` lies in the range of ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import Factorization, SingularMatrixError, factorize


@dataclass(eq=False)
class AugmentedPoisson:
    K: sp.csr_matrix
    r: np.ndarray
    factorization: Factorization
    constraint: str

    @property
    def n(self) -> int:
        return self.K.shape[0]


def build_augmented(K, dofmap_p=None, mean_weights: np.ndarray | None = None, constraint: str = "mass",
                    method: str = "direct") -> AugmentedPoisson:
    """Factorize the bordered matrix once.

    ``mean_weights`` (``int phi_i dV``) is required for ``constraint="mass"``.
    """
    K = sp.csr_matrix(K)
    n = K.shape[0]
    if constraint == "mass":
        if mean_weights is None:
            raise ValueError("mass constraint needs the pressure mean weights")
        r = np.asarray(mean_weights, dtype=float)
    elif constraint == "ones":
        r = np.ones(n)
    else:
        raise ValueError(f"unknown constraint {constraint!r}")
    if r.shape != (n,):
        raise ValueError("constraint vector does not match K")
    col = sp.csr_matrix(r[:, None])
    A = sp.bmat([[K, col], [col.T, None]], format="csc")
    try:
        fac = factorize(A, method=method, symmetric=True)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"bordered pressure matrix is singular: {exc}") from exc
    return AugmentedPoisson(K, r, fac, constraint)


def solve_pressure(aug: AugmentedPoisson, F: np.ndarray) -> tuple[np.ndarray, float]:
    """Return the constrained pressure coefficients ``P`` and multiplier ``c``."""
    F = np.asarray(F, dtype=float)
    if F.shape != (aug.n,):
        raise ValueError(f"dimension mismatch: K is {aug.n}, rhs {F.shape}")
    x = aug.factorization.solve(np.concatenate([F, [0.0]]))
    return x[:-1], float(x[-1])
