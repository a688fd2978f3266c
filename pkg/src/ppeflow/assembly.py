"""Matrices and load vectors of the mixed (sigma, u) system and the pressure problem.

Element matrices are computed from reference tabulations contracted with
per-triangle metric tensors, e.g. the RT mass matrix is
``sum_ab (J^T J)_ab / det J * int psi_a psi_b``. Periodic identification is
already built into the dofmaps, so assembly is a plain scatter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fem.quadrature import triangle_quadrature
from .fem.space import Space, boundary_quadrature
from .mesh import Mesh

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])  # curl of a scalar: ROT @ grad


def default_degree(r: int) -> int:
    return 2 * r + 2


def advection_degree(r: int) -> int:
    return 3 * r


@dataclass
class SystemMatrices:
    """Sparse operators of the semi-discrete system.

    ``C`` has sigma rows and u columns (``<u, curl tau>``); ``G`` has u rows
    and p columns (``<grad p, v>``).
    """

    M_sigma: sp.csr_matrix
    C: sp.csr_matrix
    D: sp.csr_matrix
    M_u: sp.csr_matrix
    K: sp.csr_matrix
    G: sp.csr_matrix
    mean_p: np.ndarray  # int phi_i dV for the pressure space


@dataclass
class BoundaryData:
    """Boundary velocity ``g`` and its time derivative per boundary tag.

    Each callable maps ``(points (N, 2), t)`` to ``(N, 2)``. Tags without an
    entry carry zero data.
    """

    g: dict[str, Callable] = field(default_factory=dict)
    g_t: dict[str, Callable] = field(default_factory=dict)

    @classmethod
    def on_tags(cls, g: Callable, g_t: Callable, tags) -> "BoundaryData":
        return cls({t: g for t in tags}, {t: g_t for t in tags})

    def _eval(self, table, x: np.ndarray, tags: np.ndarray, t: float) -> np.ndarray:
        """``x`` (B, n, 2) on edges labelled ``tags`` (B,) -> (B, n, 2)."""
        out = np.zeros_like(x)
        for tag, fn in table.items():
            sel = tags == tag
            if sel.any():
                pts = x[sel].reshape(-1, 2)
                out[sel] = np.asarray(fn(pts, t), dtype=float).reshape(x[sel].shape)
        return out

    def eval_g(self, x, tags, t):
        return self._eval(self.g, x, tags, t)

    def eval_g_t(self, x, tags, t):
        return self._eval(self.g_t, x, tags, t)

    def net_flux(self, mesh: Mesh, t: float, degree: int = 8) -> float:
        """Net outward flux of ``g`` through the non-periodic boundary."""
        total = 0.0
        for grp in boundary_quadrature(mesh, degree).groups:
            g = self.eval_g(grp["x"], grp["tags"], t)
            total += float(np.sum(grp["w"] * np.einsum("bqa,ba->bq", g, grp["n"])))
        return total

    def check_zero_flux(self, mesh: Mesh, times=(0.0, 0.5, 1.0, 10.0), tol: float = 1e-10) -> None:
        scale = float(np.sum(mesh.edge_lengths[mesh.boundary_edges]))
        for t in times:
            flux = self.net_flux(mesh, t)
            if abs(flux) > tol * max(scale, 1.0):
                raise ValueError(f"boundary data has net flux {flux:.3e} at t={t}")


# ----------------------------------------------------------------------------
# matrices


def _coo(rows_dofs, cols_dofs, local, shape) -> sp.csr_matrix:
    T, ni = rows_dofs.shape
    nj = cols_dofs.shape[1]
    r = np.broadcast_to(rows_dofs[:, :, None], (T, ni, nj)).ravel()
    c = np.broadcast_to(cols_dofs[:, None, :], (T, ni, nj)).ravel()
    return sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()


def _spaces(dofmaps):
    if len(dofmaps) != 3 or not all(isinstance(s, Space) for s in dofmaps):
        raise ValueError("expected the (sigma, u, p) spaces")
    return dofmaps


def assemble_system(mesh: Mesh, dofmaps, r: int, degree: int | None = None) -> SystemMatrices:
    """Assemble M_sigma, C, D, M_u, K and G for ``P_r x RT_{r-1} x P_r``."""
    S, V, P = _spaces(dofmaps)
    if S.mesh is not mesh or V.mesh is not mesh or P.mesh is not mesh:
        raise ValueError("spaces are defined on a different mesh")
    if S.r != r or V.r != r:
        raise ValueError("dimension mismatch: spaces do not match degree r")
    q = triangle_quadrature(degree or default_degree(max(r, P.r)))
    w = q.weights
    J = mesh.jacobians
    Jinv = mesh.inverse_jacobians
    det = mesh.det_jacobians

    phi, dphi = S.element.tabulate(q.points)
    psi, div, _ = V.element.tabulate(q.points)
    sv = V.dofmap.cell_signs
    ss = sv[:, :, None] * sv[:, None, :]

    Mref = np.einsum("q,iq,jq->ij", w, phi, phi)
    M_sigma_loc = det[:, None, None] * Mref[None]

    Kref = np.einsum("q,iqa,jqb->abij", w, dphi, dphi)
    B = np.einsum("tac,tbc->tab", Jinv, Jinv)
    K_s = det[:, None, None] * np.einsum("tab,abij->tij", B, Kref)

    Muref = np.einsum("q,iqa,jqb->abij", w, psi, psi)
    A = np.einsum("tca,tcb->tab", J, J)
    Mu_loc = np.einsum("tab,abij->tij", A, Muref) / det[:, None, None] * ss

    Dref = np.einsum("q,iq,jq->ij", w, div, div)
    D_loc = Dref[None] / det[:, None, None] * ss

    # C[i (sigma), j (u)] = int psi_j^T (J^T ROT J^{-T}) dphi_i
    Cref = np.einsum("q,iqb,jqa->abij", w, dphi, psi)
    Q = np.einsum("tca,cd,tbd->tab", J, ROT, Jinv)
    C_loc = np.einsum("tab,abij->tij", Q, Cref) * sv[:, None, :]

    phi_p, dphi_p = P.element.tabulate(q.points)
    Gref = np.einsum("q,jqa,iqa->ji", w, psi, dphi_p)
    G_loc = Gref[None] * sv[:, :, None]
    Kp_loc = K_s
    if P.r != S.r:
        Kpref = np.einsum("q,iqa,jqb->abij", w, dphi_p, dphi_p)
        Kp_loc = det[:, None, None] * np.einsum("tab,abij->tij", B, Kpref)

    ds, du, dp = S.dofmap.cell_dofs, V.dofmap.cell_dofs, P.dofmap.cell_dofs
    ns, nu, np_ = S.ndof, V.ndof, P.ndof
    mean_p = np.bincount(dp.ravel(), weights=(det[:, None] * (phi_p @ w)[None, :]).ravel(), minlength=np_)
    return SystemMatrices(
        M_sigma=_coo(ds, ds, M_sigma_loc, (ns, ns)),
        C=_coo(ds, du, C_loc, (ns, nu)),
        D=_coo(du, du, D_loc, (nu, nu)),
        M_u=_coo(du, du, Mu_loc, (nu, nu)),
        K=_coo(dp, dp, Kp_loc, (np_, np_)),
        G=_coo(du, dp, G_loc, (nu, np_)),
        mean_p=mean_p,
    )


# ----------------------------------------------------------------------------
# load vectors


def load_vector(V: Space, f: Callable, t: float, degree: int | None = None) -> np.ndarray:
    """``<f(., t), v_i>`` for the RT space ``V``; ``f(points, t) -> (N, 2)``."""
    q, x, _ = V.quadrature(degree or default_degree(V.r))
    fx = np.asarray(f(x.reshape(-1, 2), t), dtype=float).reshape(x.shape)
    return rt_dual(V, fx, q)


def rt_dual(V: Space, fx: np.ndarray, q) -> np.ndarray:
    """``sum_T int fx . v_i`` for a field sampled at physical quadrature points."""
    psi, _, _ = V.element.tabulate(q.points)
    Jt_f = np.einsum("tba,tqb->tqa", V.mesh.jacobians, fx)
    local = (Jt_f * q.weights[None, :, None]).reshape(len(Jt_f), -1) @ psi.reshape(len(psi), -1).T
    return V.scatter(local)


def p_grad_dual(P: Space, fx: np.ndarray, q) -> np.ndarray:
    """``sum_T int fx . grad q_i`` for a vector field at quadrature points."""
    _, dphi = P.element.tabulate(q.points)
    mesh = P.mesh
    Jinv_f = np.einsum("tab,tqb->tqa", mesh.inverse_jacobians, fx) * mesh.det_jacobians[:, None, None]
    local = (Jinv_f * q.weights[None, :, None]).reshape(len(Jinv_f), -1) @ dphi.reshape(len(dphi), -1).T
    return P.scatter(local)


def assemble_sigma_boundary_rhs(mesh: Mesh, S: Space, bc: BoundaryData | None, t: float, degree: int | None = None):
    """``b_i = int_{boundary} tau_i (n x g) ds`` with ``n x g = n_x g_y - n_y g_x``."""
    b = np.zeros(S.ndof)
    if bc is None or not bc.g:
        return b
    for grp in boundary_quadrature(mesh, degree or default_degree(S.r)).groups:
        g = bc.eval_g(grp["x"], grp["tags"], t)
        n = grp["n"]
        nxg = n[:, None, 0] * g[:, :, 1] - n[:, None, 1] * g[:, :, 0]
        phi, _ = S.element.tabulate(grp["ref"])
        local = np.einsum("bq,iq->bi", grp["w"] * nxg, phi)
        b += S.scatter(local, grp["tris"])
    return b


def element_advection(V: Space, u: np.ndarray, q) -> np.ndarray:
    """``(u_h . grad) u_h`` at physical quadrature points, element by element."""
    vals, _, grad = V.evaluate_ref(u, q.points)
    return np.einsum("tqab,tqb->tqa", grad, vals)


def assemble_advection(mesh: Mesh, V: Space, u_coeffs: np.ndarray, degree: int | None = None) -> np.ndarray:
    """``N_i = sum_T int_T ((u_h . grad) u_h) . v_i`` with per-element gradients."""
    q = triangle_quadrature(degree or advection_degree(V.r))
    return rt_dual(V, element_advection(V, u_coeffs, q), q)


def assemble_gradp_force(mesh: Mesh, V: Space, P: Space, p_coeffs: np.ndarray, degree: int | None = None):
    """``(G p)_i = int grad p_h . v_i`` by direct element quadrature."""
    q = triangle_quadrature(degree or default_degree(max(V.r, P.r)))
    _, gp = P.evaluate_ref(p_coeffs, q.points)
    return rt_dual(V, gp, q)


def assemble_pressure_rhs(
    mesh: Mesh,
    spaces,
    form: str,
    sigma: np.ndarray,
    u: np.ndarray,
    f: Callable | None,
    bc: BoundaryData | None,
    lam: float,
    t: float,
    nu: float = 1.0,
    nonlinear: bool = False,
    degree: int | None = None,
) -> np.ndarray:
    """Right-hand side of the pressure Poisson problem.

    ``weak1``: ``<f_eff, grad q> - nu int n.(curl sigma_h) q + lam int n.(u_h - g) q
    - int (n.g_t) q``; ``weak2`` replaces the second term by
    ``-nu <curl sigma_h, grad q>``. ``f_eff = f - (u_h.grad)u_h`` when
    ``nonlinear``.
    """
    if form not in ("weak1", "weak2"):
        raise ValueError(f"unknown pressure form {form!r}")
    S, V, P = spaces
    r = max(S.r, P.r)
    deg = degree or (max(default_degree(r), advection_degree(r)) if nonlinear else default_degree(r))
    q = triangle_quadrature(deg)
    feff = None
    if f is not None:
        _, x, _ = P.quadrature(deg)
        feff = np.asarray(f(x.reshape(-1, 2), t), dtype=float).reshape(x.shape)
    if nonlinear:
        adv = element_advection(V, u, q)
        feff = -adv if feff is None else feff - adv
    if form == "weak2":
        _, gs = S.evaluate_ref(sigma, q.points)
        curl = np.einsum("ab,tqb->tqa", ROT, gs)
        feff = -nu * curl if feff is None else feff - nu * curl
    F = np.zeros(P.ndof) if feff is None else p_grad_dual(P, feff, q)

    for grp in boundary_quadrature(mesh, default_degree(r)).groups:
        tris, n, w = grp["tris"], grp["n"], grp["w"]
        phi, _ = P.element.tabulate(grp["ref"])
        integrand = np.zeros_like(w)
        if form == "weak1":
            cl = S.local(sigma, tris)
            _, dphi_s = S.element.tabulate(grp["ref"])
            gref = np.einsum("bi,iqa->bqa", cl, dphi_s)
            gs = np.einsum("bca,bqc->bqa", mesh.inverse_jacobians[tris], gref)
            n_curl = n[:, None, 0] * gs[:, :, 1] - n[:, None, 1] * gs[:, :, 0]
            integrand -= nu * n_curl
        if lam != 0.0:
            cu = V.local(u, tris)
            psi, _, _ = V.element.tabulate(grp["ref"])
            uref = np.einsum("bi,iqa->bqa", cu, psi)
            uh = np.einsum("bac,bqc->bqa", mesh.jacobians[tris], uref) / mesh.det_jacobians[tris][:, None, None]
            un = np.einsum("bqa,ba->bq", uh, n)
            if bc is not None:
                un = un - np.einsum("bqa,ba->bq", bc.eval_g(grp["x"], grp["tags"], t), n)
            integrand += lam * un
        if bc is not None and bc.g_t:
            integrand -= np.einsum("bqa,ba->bq", bc.eval_g_t(grp["x"], grp["tags"], t), n)
        F += P.scatter(np.einsum("bq,iq->bi", w * integrand, phi), tris)
    return F
