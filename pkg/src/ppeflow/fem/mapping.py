"""Affine maps from the reference triangle to mesh triangles.

Scalar P_r values are unchanged and gradients transform with ``J^{-T}``.
RT values use the contravariant Piola map ``v = J v_ref / det J``, so
divergences scale by ``1 / det J`` and normal fluxes through edges are
preserved.
"""

from __future__ import annotations

import numpy as np

from ..mesh import Mesh


class DegenerateTriangleError(ValueError):
    pass


def map_points(mesh: Mesh, ref_points: np.ndarray, tris=None) -> np.ndarray:
    """Physical images (T, n, 2) of reference points under each triangle map."""
    tris = np.arange(mesh.n_triangles) if tris is None else np.atleast_1d(tris)
    p0 = mesh.vertices[mesh.triangles[tris, 0]]
    return p0[:, None, :] + np.einsum("tab,qb->tqa", mesh.jacobians[tris], np.atleast_2d(ref_points))


def pull_back_points(mesh: Mesh, tris: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reference coordinates (N, 2) of physical points ``x`` in triangles ``tris``."""
    p0 = mesh.vertices[mesh.triangles[tris, 0]]
    return np.einsum("nab,nb->na", mesh.inverse_jacobians[tris], x - p0)


def map_p(mesh: Mesh, tris, values: np.ndarray, grads: np.ndarray):
    """Map P_r reference data (ndof, n) / (ndof, n, 2) to triangles ``tris``.

    Returns values (T, ndof, n) and physical gradients (T, ndof, n, 2).
    """
    Jinv = mesh.inverse_jacobians[tris]
    T = len(Jinv)
    return (
        np.broadcast_to(values, (T,) + values.shape),
        np.einsum("tba,iqb->tiqa", Jinv, grads),
    )


def map_rt(mesh: Mesh, tris, values: np.ndarray, divs: np.ndarray, grads=None, signs=None):
    """Contravariant Piola map of RT reference data to triangles ``tris``.

    ``signs`` (T, ndof) applies the global edge orientation. Returns values
    (T, ndof, n, 2), divergences (T, ndof, n) and, if ``grads`` is given,
    gradients (T, ndof, n, 2, 2).
    """
    J = mesh.jacobians[tris]
    det = mesh.det_jacobians[tris]
    s = np.ones((len(J), values.shape[0])) if signs is None else signs
    scale = s / det[:, None]
    v = np.einsum("tab,iqb->tiqa", J, values) * scale[:, :, None, None]
    d = divs[None] * scale[:, :, None]
    if grads is None:
        return v, d
    Jinv = mesh.inverse_jacobians[tris]
    g = np.einsum("tac,iqcd,tdb->tiqab", J, grads, Jinv) * scale[:, :, None, None, None]
    return v, d, g


def map_to_physical(mesh: Mesh, triangle: int, element_kind: str, reference_data, signs=None):
    """Map reference basis data to a single triangle.

    ``reference_data`` is ``(values, gradients)`` for ``"P"`` and
    ``(values, divergences)`` or ``(values, divergences, gradients)`` for
    ``"RT"``. Raises :class:`DegenerateTriangleError` on a singular Jacobian.
    """
    det = mesh.det_jacobians[triangle]
    scale = np.abs(mesh.jacobians[triangle]).max() ** 2
    if not abs(det) > 1e-14 * max(scale, 1e-300):
        raise DegenerateTriangleError(f"triangle {triangle} has a singular Jacobian")
    tris = np.array([triangle])
    if element_kind == "P":
        v, g = map_p(mesh, tris, *reference_data)
        return v[0], g[0]
    if element_kind == "RT":
        s = None if signs is None else np.asarray(signs, dtype=float)[None, :]
        out = map_rt(mesh, tris, *reference_data, signs=s)
        return tuple(o[0] for o in out)
    raise ValueError(f"unknown element kind {element_kind!r}")
