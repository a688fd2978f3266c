"""Finite element spaces on a mesh: evaluation, interpolation, boundary traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import LOCAL_EDGES, Mesh
from .dofmap import DofMap, build_dofmap
from .elements import edge_points, lagrange, raviart_thomas
from .mapping import map_points, pull_back_points
from .quadrature import edge_quadrature, triangle_quadrature


@dataclass(eq=False)
class BoundaryQuadrature:
    """Quadrature on a set of boundary edges, grouped by the local edge index.

    For each group: ``edges`` (indices into ``mesh.boundary_edges``),
    ``tris``, reference points (n, 2), physical points (B, n, 2), weights
    (B, n) including the edge length, and outward normals (B, 2).
    """

    groups: list


class Space:
    """P_r (``kind="P"``) or RT_{r-1} (``kind="RT"``) on ``mesh``."""

    def __init__(self, mesh: Mesh, kind: str, r: int, dofmap: DofMap | None = None):
        self.mesh = mesh
        self.kind = kind
        self.r = r
        self.element = lagrange(r) if kind == "P" else raviart_thomas(r - 1)
        self.dofmap = dofmap or build_dofmap(mesh, kind, r)

    @property
    def ndof(self) -> int:
        return self.dofmap.ndof

    def local(self, coeffs: np.ndarray, tris=None) -> np.ndarray:
        """Signed local coefficients (T, nloc)."""
        dm = self.dofmap
        if tris is None:
            return coeffs[dm.cell_dofs] * dm.cell_signs
        return coeffs[dm.cell_dofs[tris]] * dm.cell_signs[tris]

    def scatter(self, local_vectors: np.ndarray, tris=None) -> np.ndarray:
        """Sum signed local vectors (T, nloc) into a global vector."""
        dm = self.dofmap
        cd = dm.cell_dofs if tris is None else dm.cell_dofs[tris]
        cs = dm.cell_signs if tris is None else dm.cell_signs[tris]
        return np.bincount(cd.ravel(), weights=(local_vectors * cs).ravel(), minlength=self.ndof)

    # -- evaluation -------------------------------------------------------
    def evaluate_ref(self, coeffs: np.ndarray, ref_points: np.ndarray, tris=None, derivatives: bool = True):
        """Field values at the images of ``ref_points`` in every triangle.

        P: returns (values (T, n), gradients (T, n, 2)).
        RT: returns (values (T, n, 2), divergence (T, n), gradient (T, n, 2, 2))
        with ``gradient[..., a, b] = d u_a / d x_b``.
        """
        mesh = self.mesh
        tris = np.arange(mesh.n_triangles) if tris is None else np.asarray(tris)
        cl = self.local(coeffs, tris)
        if self.kind == "P":
            v, g = self.element.tabulate(ref_points)
            vals = cl @ v
            gref = np.einsum("ti,iqa->tqa", cl, g)
            return vals, np.einsum("tba,tqb->tqa", mesh.inverse_jacobians[tris], gref)
        v, d, g = self.element.tabulate(ref_points)
        det = mesh.det_jacobians[tris]
        J = mesh.jacobians[tris]
        vref = np.einsum("ti,iqa->tqa", cl, v)
        vals = np.einsum("tab,tqb->tqa", J, vref) / det[:, None, None]
        div = (cl @ d) / det[:, None]
        if not derivatives:
            return vals, div, None
        gref = np.einsum("ti,iqab->tqab", cl, g)
        grad = np.einsum("tac,tqcd,tdb->tqab", J, gref, mesh.inverse_jacobians[tris]) / det[:, None, None, None]
        return vals, div, grad

    def evaluate_at(self, coeffs: np.ndarray, points: np.ndarray, tris=None):
        """Point evaluation at physical ``points`` (N, 2).

        Returns the same tuple as :meth:`evaluate_ref` with the leading
        triangle axis replaced by the point axis. Points outside the mesh give NaN.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if tris is None:
            tris, _ = self.mesh.locate_points(points)
        tris = np.asarray(tris)
        ok = tris >= 0
        n = len(points)
        shape_v = (n,) if self.kind == "P" else (n, 2)
        out_v = np.full(shape_v, np.nan)
        out_d = np.full((n, 2) if self.kind == "P" else (n,), np.nan)
        out_g = None if self.kind == "P" else np.full((n, 2, 2), np.nan)
        if ok.any():
            idx = np.flatnonzero(ok)
            ref = pull_back_points(self.mesh, tris[idx], points[idx])
            res = self._evaluate_pointwise(coeffs, tris[idx], ref)
            out_v[idx] = res[0]
            out_d[idx] = res[1]
            if out_g is not None:
                out_g[idx] = res[2]
        return (out_v, out_d) if self.kind == "P" else (out_v, out_d, out_g)

    def _evaluate_pointwise(self, coeffs, tris, ref):
        mesh = self.mesh
        cl = self.local(coeffs, tris)
        if self.kind == "P":
            v, g = self.element.tabulate(ref)  # (i, n), (i, n, 2)
            vals = np.einsum("ni,in->n", cl, v)
            gref = np.einsum("ni,ina->na", cl, g)
            return vals, np.einsum("nba,nb->na", mesh.inverse_jacobians[tris], gref)
        v, d, g = self.element.tabulate(ref)
        det = mesh.det_jacobians[tris]
        J = mesh.jacobians[tris]
        vref = np.einsum("ni,ina->na", cl, v)
        vals = np.einsum("nab,nb->na", J, vref) / det[:, None]
        div = np.einsum("ni,in->n", cl, d) / det
        gref = np.einsum("ni,inab->nab", cl, g)
        grad = np.einsum("nac,ncd,ndb->nab", J, gref, mesh.inverse_jacobians[tris]) / det[:, None, None]
        return vals, div, grad

    # -- interpolation ----------------------------------------------------
    def interpolate(self, func, extra_degree: int = 8) -> np.ndarray:
        """Canonical interpolant of ``func(points (..., 2)) -> (...,)`` or ``(..., 2)``.

        P: nodal values. RT: edge-normal and interior moments of the Piola
        pull-back.
        """
        mesh = self.mesh
        dm = self.dofmap
        out = np.zeros(self.ndof)
        if self.kind == "P":
            x = map_points(mesh, self.element.nodes)  # (T, nloc, 2)
            vals = np.asarray(func(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:2])
            out[dm.cell_dofs] = vals
            return out
        J = mesh.jacobians
        det = mesh.det_jacobians
        Jinv = mesh.inverse_jacobians

        def pulled(pts):
            x = map_points(mesh, pts)
            v = np.asarray(func(x.reshape(-1, 2)), dtype=float).reshape(x.shape)
            return np.einsum("tab,tqb->tqa", Jinv, v) * det[:, None, None]

        dofs = self.element.apply_dofs(pulled, extra_degree)  # (nloc, T)
        out[dm.cell_dofs] = dofs.T * dm.cell_signs
        return out

    # -- quadrature helpers -----------------------------------------------
    def quadrature(self, degree: int):
        """Reference rule and physical points (T, n, 2) / weights (T, n); memoized per degree."""
        cache = self.__dict__.setdefault("_quad", {})
        if degree not in cache:
            q = triangle_quadrature(degree)
            x = map_points(self.mesh, q.points)
            w = q.weights[None, :] * self.mesh.det_jacobians[:, None]
            x.flags.writeable = False
            w.flags.writeable = False
            cache[degree] = (q, x, w)
        return cache[degree]

    def boundary_quadrature(self, degree: int, mask: np.ndarray | None = None) -> BoundaryQuadrature:
        return boundary_quadrature(self.mesh, degree, mask)

    def boundary_basis(self, group) -> tuple:
        """Physical basis data on a boundary-edge group (from :func:`boundary_quadrature`)."""
        from .mapping import map_p, map_rt

        tris = group["tris"]
        if self.kind == "P":
            v, g = self.element.tabulate(group["ref"])
            return map_p(self.mesh, tris, v, g)
        v, d, g = self.element.tabulate(group["ref"])
        return map_rt(self.mesh, tris, v, d, g, signs=self.dofmap.cell_signs[tris])


def boundary_quadrature(mesh: Mesh, degree: int, mask: np.ndarray | None = None) -> BoundaryQuadrature:
    """Edge quadrature on the boundary edges selected by ``mask``.

    Defaults to all non-periodic boundary edges.
    """
    if mask is None:
        cache = mesh.__dict__.setdefault("_boundary_quadrature", {})
        if degree not in cache:
            cache[degree] = boundary_quadrature(mesh, degree, mesh.physical_boundary)
        return cache[degree]
    eq = edge_quadrature(degree)
    s = eq.points[:, 0]
    tri_all, loc_all = mesh.boundary_local
    normals = mesh.boundary_normals
    groups = []
    for l in range(3):
        sel = np.flatnonzero(mask & (loc_all == l))
        if len(sel) == 0:
            continue
        tris = tri_all[sel]
        ref = edge_points(l, s)
        x = map_points(mesh, ref, tris)
        a = mesh.vertices[mesh.triangles[tris, LOCAL_EDGES[l, 0]]]
        b = mesh.vertices[mesh.triangles[tris, LOCAL_EDGES[l, 1]]]
        length = np.hypot(*(b - a).T)
        groups.append(
            dict(
                local_edge=l,
                edges=sel,
                tris=tris,
                ref=ref,
                x=x,
                w=length[:, None] * eq.weights[None, :],
                n=normals[sel],
                tags=mesh.boundary_tags[sel],
            )
        )
    return BoundaryQuadrature(groups)


def make_spaces(mesh: Mesh, r: int) -> tuple[Space, Space, Space]:
    """(sigma, u, p) spaces P_r x RT_{r-1} x P_r; sigma and p share a dofmap."""
    sig = Space(mesh, "P", r)
    return sig, Space(mesh, "RT", r), Space(mesh, "P", r, dofmap=sig.dofmap)
