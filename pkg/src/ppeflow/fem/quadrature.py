"""Quadrature on the reference triangle and on the unit interval."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 30


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights; ``points`` are reference Cartesian coordinates.

    On the triangle the weights sum to 1/2 (reference area), on the edge to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        x, y = self.points[:, 0], self.points[:, 1]
        return np.stack([1.0 - x - y, x, y], axis=1)

    def __len__(self) -> int:
        return len(self.weights)


def _check(degree: int) -> None:
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (1..{MAX_DEGREE})")


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for total degree ``degree``.

    The square [0,1]^2 is mapped onto the triangle by (u, v) -> (u, (1-u) v);
    the (1-u) Jacobian is absorbed into a Gauss-Jacobi weight in u.
    """
    _check(degree)
    n = degree // 2 + 1
    tu, wu = roots_jacobi(n, 1.0, 0.0)
    tv, wv = roots_legendre(n)
    u = 0.5 * (1.0 + tu)
    v = 0.5 * (1.0 + tv)
    wu = wu / 4.0
    wv = wv / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.stack([U.ravel(), ((1.0 - U) * V).ravel()], axis=1)
    return QuadratureRule(pts, W.ravel(), degree)


@lru_cache(maxsize=None)
def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre on [0, 1]; ``points`` has shape (n, 1)."""
    _check(degree)
    n = degree // 2 + 1
    t, w = roots_legendre(n)
    return QuadratureRule((0.5 * (1.0 + t))[:, None], 0.5 * w, degree)
