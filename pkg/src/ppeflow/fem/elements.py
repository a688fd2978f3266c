"""Reference elements on the triangle (0,0), (1,0), (0,1).

``LagrangeElement(r)`` is the nodal P_r element on equispaced nodes.
``RaviartThomasElement(k)`` is RT_k, built as the dual basis of edge normal
moments against shifted Legendre polynomials and interior moments against
vector polynomials of degree k-1. Both use orthogonal (Dubiner)
polynomials rather than monomials to keep the dual basis well conditioned.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import eval_jacobi

from ..mesh import LOCAL_EDGES
from .quadrature import edge_quadrature, triangle_quadrature

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_AREA = 0.5


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    return [(a, t - a) for t in range(degree + 1) for a in range(t, -1, -1)]


def eval_monomials(exps, pts: np.ndarray):
    """Values and first derivatives of x^a y^b, each of shape (m, n)."""
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    a = np.array([e[0] for e in exps])[:, None]
    b = np.array([e[1] for e in exps])[:, None]
    xa = x[None, :] ** a
    yb = y[None, :] ** b
    xa1 = np.where(a > 0, a * x[None, :] ** np.maximum(a - 1, 0), 0.0)
    yb1 = np.where(b > 0, b * y[None, :] ** np.maximum(b - 1, 0), 0.0)
    return xa * yb, xa1 * yb, xa * yb1


def shifted_legendre(j: int, s: np.ndarray) -> np.ndarray:
    c = np.zeros(j + 1)
    c[j] = 1.0
    return legendre.legval(2.0 * s - 1.0, c)


def _legendre_1d(j: int, s: np.ndarray):
    c = np.zeros(j + 1)
    c[j] = 1.0
    return legendre.legval(2.0 * s - 1.0, c), 2.0 * legendre.legval(2.0 * s - 1.0, legendre.legder(c))


def eval_legendre_products(exps, pts: np.ndarray):
    """Values and first derivatives of L_a(2x-1) L_b(2y-1), each (m, n).

    Same span as the monomials ``exps`` but far better conditioned on the
    reference triangle.
    """
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    top = max(max(e) for e in exps)
    lx = [_legendre_1d(j, x) for j in range(top + 1)]
    ly = [_legendre_1d(j, y) for j in range(top + 1)]
    v = np.array([lx[a][0] * ly[b][0] for a, b in exps])
    dx = np.array([lx[a][1] * ly[b][0] for a, b in exps])
    dy = np.array([lx[a][0] * ly[b][1] for a, b in exps])
    return v, dx, dy


def eval_dubiner(degree: int, pts: np.ndarray):
    """Orthogonal (Dubiner) basis of P_degree on the reference triangle.

    Returns (exps, values, d/dx, d/dy) with arrays of shape (m, n); ``exps``
    lists (p, q) with p + q <= degree in the same order as
    ``monomial_exponents``.
    """
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    n = len(x)
    s = 1.0 - y
    w = 2.0 * x + y - 1.0  # a * s in collapsed coordinates
    # Q_p = P_p(a) s^p via the homogenized Legendre recurrence
    Q = [np.ones(n)]
    Qx = [np.zeros(n)]
    Qy = [np.zeros(n)]
    if degree >= 1:
        Q.append(w.copy())
        Qx.append(2.0 * np.ones(n))
        Qy.append(np.ones(n))
    for p in range(1, degree):
        a1 = (2 * p + 1) / (p + 1)
        a2 = p / (p + 1)
        Q.append(a1 * w * Q[p] - a2 * s * s * Q[p - 1])
        Qx.append(a1 * (2.0 * Q[p] + w * Qx[p]) - a2 * s * s * Qx[p - 1])
        Qy.append(a1 * (Q[p] + w * Qy[p]) - a2 * (s * s * Qy[p - 1] - 2.0 * s * Q[p - 1]))
    t = 2.0 * y - 1.0
    exps = monomial_exponents(degree)
    vals, dxs, dys = [], [], []
    for p, q in exps:
        J = eval_jacobi(q, 2 * p + 1, 0, t)
        dJ = (q + 2 * p + 2) * eval_jacobi(q - 1, 2 * p + 2, 1, t) if q > 0 else np.zeros(n)
        vals.append(Q[p] * J)
        dxs.append(Qx[p] * J)
        dys.append(Qy[p] * J + Q[p] * dJ)
    return exps, np.array(vals), np.array(dxs), np.array(dys)


def reference_edge(l: int):
    """Start point, tangent, length and unit normal of local edge ``l``."""
    a = REF_VERTICES[LOCAL_EDGES[l, 0]]
    b = REF_VERTICES[LOCAL_EDGES[l, 1]]
    t = b - a
    length = float(np.hypot(*t))
    n = np.array([t[1], -t[0]]) / length
    return a, t, length, n


def edge_points(l: int, s: np.ndarray) -> np.ndarray:
    a, t, _, _ = reference_edge(l)
    return a[None, :] + np.asarray(s)[:, None] * t[None, :]


class LagrangeElement:
    def __init__(self, r: int):
        if not 1 <= r <= 5:
            raise ValueError("Lagrange degree must be in 1..5")
        self.degree = r
        self.n_vertex = 1
        self.n_edge = r - 1
        self.n_interior = (r - 1) * (r - 2) // 2
        self.ndof = (r + 1) * (r + 2) // 2
        self.nodes = self._nodes()
        self.exps = monomial_exponents(r)
        _, V, _, _ = eval_dubiner(r, self.nodes)  # (m, ndof)
        self.coeffs = np.linalg.inv(V).T  # phi_i = sum_m coeffs[m, i] * B_m

    def _nodes(self) -> np.ndarray:
        r = self.degree
        nodes = [REF_VERTICES[i] for i in range(3)]
        for l in range(3):
            a, t, _, _ = reference_edge(l)
            for i in range(1, r):
                nodes.append(a + t * i / r)
        for j in range(1, r):
            for i in range(1, r - j):
                nodes.append(np.array([i / r, j / r]))
        return np.array(nodes)

    def tabulate(self, pts: np.ndarray):
        """Values (ndof, n) and reference gradients (ndof, n, 2)."""
        _, v, dx, dy = eval_dubiner(self.degree, pts)
        C = self.coeffs
        return C.T @ v, np.stack([C.T @ dx, C.T @ dy], axis=2)


class RaviartThomasElement:
    def __init__(self, k: int):
        if not 0 <= k <= 4:
            raise ValueError("Raviart-Thomas order must be in 0..4")
        self.order = k
        self.n_edge = k + 1
        self.n_interior = k * (k + 1)
        self.ndof = (k + 1) * (k + 3)
        self.exps = monomial_exponents(k)
        D = self.apply_dofs(lambda p: self._generators(p)[0])  # (ndof, ngen)
        self.coeffs = np.linalg.inv(D)  # phi_l = sum_j gen_j * coeffs[j, l]

    def _generators(self, pts: np.ndarray):
        """Spanning set of RT_k: (B, 0), (0, B) for B in P_k, and x B for
        the top-degree B. Returns values (ngen, n, 2), gradients (ngen, n, 2, 2)."""
        pts = np.atleast_2d(pts)
        k = self.order
        _, v, dx, dy = eval_dubiner(k, pts)
        zero = np.zeros_like(v)
        top = np.array([a + b == k for a, b in self.exps])
        x, y = pts[:, 0], pts[:, 1]
        vt, dxt, dyt = v[top], dx[top], dy[top]
        vals = np.concatenate(
            [np.stack([v, zero], axis=2), np.stack([zero, v], axis=2), np.stack([x * vt, y * vt], axis=2)]
        )
        grad_x = np.concatenate([np.stack([dx, dy], axis=2), np.stack([zero, zero], axis=2),
                                 np.stack([vt + x * dxt, x * dyt], axis=2)])
        grad_y = np.concatenate([np.stack([zero, zero], axis=2), np.stack([dx, dy], axis=2),
                                 np.stack([y * dxt, vt + y * dyt], axis=2)])
        return vals, np.stack([grad_x, grad_y], axis=2)

    def apply_dofs(self, func, extra_degree: int = 0) -> np.ndarray:
        """Apply the reference dof functionals to ``func``.

        ``func(pts)`` returns an array (..., n, 2); the result has the dof
        axis first and ``func``'s leading axes after it. The moments are
        exact for polynomial ``func`` of degree <= k + 1 + ``extra_degree``.
        """
        k = self.order
        eq = edge_quadrature(2 * k + 2 + extra_degree)
        rows = []
        for l in range(3):
            _, _, length, n = reference_edge(l)
            pts = edge_points(l, eq.points[:, 0])
            fn = func(pts) @ n  # (..., nq)
            for j in range(k + 1):
                rows.append(length * fn @ (eq.weights * shifted_legendre(j, eq.points[:, 0])))
        if k > 0:
            tq = triangle_quadrature(2 * k + 1 + extra_degree)
            f = func(tq.points)
            _, mv, _, _ = eval_dubiner(k - 1, tq.points)
            for comp in range(2):
                for m in mv:
                    rows.append(f[..., comp] @ (tq.weights * m))
        return np.array(rows)

    def tabulate(self, pts: np.ndarray):
        """Values (ndof, n, 2), divergences (ndof, n), gradients (ndof, n, 2, 2).

        ``grad[i, q, a, b]`` is the derivative of component a along b.
        """
        gv, gg = self._generators(pts)
        C = self.coeffs
        vals = np.einsum("jl,jqa->lqa", C, gv)
        grad = np.einsum("jl,jqab->lqab", C, gg)
        div = grad[:, :, 0, 0] + grad[:, :, 1, 1]
        return vals, div, grad


@lru_cache(maxsize=None)
def lagrange(r: int) -> LagrangeElement:
    return LagrangeElement(r)


@lru_cache(maxsize=None)
def raviart_thomas(k: int) -> RaviartThomasElement:
    return RaviartThomasElement(k)


def eval_p_basis(r: int, points):
    """P_r basis values (ndof, n) and reference gradients (ndof, n, 2)."""
    return lagrange(r).tabulate(np.atleast_2d(np.asarray(points, dtype=float)))


def eval_rt_basis(k: int, points):
    """RT_k basis values (ndof, n, 2) and divergences (ndof, n)."""
    vals, div, _ = raviart_thomas(k).tabulate(np.atleast_2d(np.asarray(points, dtype=float)))
    return vals, div
