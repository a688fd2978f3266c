"""Global degree-of-freedom numbering for P_r and RT_{r-1} spaces.

Dofs are numbered vertices first, then edges, then triangle interiors.
Periodic slave vertices and edges are identified with their masters before
numbering, so slave dofs never receive an index of their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import Mesh
from .elements import lagrange, raviart_thomas


@dataclass(eq=False)
class DofMap:
    """Local-to-global map of one finite element space.

    ``cell_dofs[t, i]`` is the global index of local basis function ``i`` on
    triangle ``t`` and ``cell_signs[t, i]`` (+1 or -1) multiplies it, which
    aligns RT edge moments with the global edge orientation.
    """

    kind: str  # "P" or "RT"
    degree: int  # r for P_r, k for RT_k
    ndof: int
    cell_dofs: np.ndarray
    cell_signs: np.ndarray
    vertex_dofs: np.ndarray  # (V,) -1 where the space has no vertex dofs
    edge_dofs: np.ndarray  # (E, n_edge) in global edge orientation
    edge_flip: np.ndarray  # (E,) orientation of each edge relative to its master
    vertex_master: np.ndarray
    edge_master: np.ndarray

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]


def periodic_identification(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Master vertex per vertex, master edge per edge and the relative orientation.

    ``edge_flip[e]`` is +1 when edge ``e`` (low to high vertex) is a
    translate of its master with the same direction.
    """
    vmaster = np.arange(mesh.n_vertices)
    emaster = np.arange(mesh.n_edges)
    eflip = np.ones(mesh.n_edges, dtype=np.int64)
    if len(mesh.periodic_pairs) == 0:
        return vmaster, emaster, eflip
    shift = np.asarray(mesh.period, dtype=float)
    for m, s in mesh.periodic_pairs:
        mv = mesh.edges[m]
        sv = mesh.edges[s]
        ms = mesh.vertices[mv] + shift
        match = np.linalg.norm(mesh.vertices[sv][:, None, :] - ms[None, :, :], axis=2)
        j = np.argmin(match, axis=1)
        if match[[0, 1], j].max() > 1e-9 or j[0] == j[1]:
            raise ValueError(f"periodic edges {m}, {s} are not translates")
        vmaster[sv[0]] = mv[j[0]]
        vmaster[sv[1]] = mv[j[1]]
        emaster[s] = m
        eflip[s] = 1 if j[0] == 0 else -1
    # resolve chains (a corner may be the slave of a vertex that is itself a slave)
    for _ in range(4):
        vmaster = vmaster[vmaster]
    return vmaster, emaster, eflip


def build_dofmap(mesh: Mesh, space_kind: str, r: int) -> DofMap:
    """Dofmap for ``P_r`` (``space_kind="P"``) or ``RT_{r-1}`` (``"RT"``)."""
    vmaster, emaster, eflip = periodic_identification(mesh)
    T = mesh.n_triangles
    tri_e = mesh.triangle_edges
    # local orientation relative to the master edge
    orient = mesh.triangle_edge_signs * eflip[tri_e]

    vert_ids = np.unique(vmaster)
    vnum = -np.ones(mesh.n_vertices, dtype=np.int64)
    vnum[vert_ids] = np.arange(len(vert_ids))
    edge_ids = np.unique(emaster)
    enum = -np.ones(mesh.n_edges, dtype=np.int64)
    enum[edge_ids] = np.arange(len(edge_ids))

    if space_kind == "P":
        el = lagrange(r)
        nv, ne, ni = 1, el.n_edge, el.n_interior
    elif space_kind == "RT":
        el = raviart_thomas(r - 1)
        nv, ne, ni = 0, el.n_edge, el.n_interior
    else:
        raise ValueError(f"unknown space kind {space_kind!r}")

    n_vdof = nv * len(vert_ids)
    n_edof = ne * len(edge_ids)
    ndof = n_vdof + n_edof + ni * T

    vertex_dofs = vnum[vmaster] if nv else -np.ones(mesh.n_vertices, dtype=np.int64)
    # edge dofs in the master edge's orientation, then re-expressed per edge
    master_block = n_vdof + ne * enum[emaster][:, None] + np.arange(ne)[None, :]
    edge_dofs = np.where(eflip[:, None] > 0, master_block, master_block[:, ::-1]) if space_kind == "P" else master_block

    cols, signs = [], []
    if nv:
        cols.append(vnum[vmaster[mesh.triangles]])
        signs.append(np.ones((T, 3)))
    j = np.arange(ne)
    for l in range(3):
        base = n_vdof + ne * enum[emaster[tri_e[:, l]]]
        o = orient[:, l][:, None]
        if space_kind == "P":
            idx = np.where(o > 0, j[None, :], ne - 1 - j[None, :])
            cols.append(base[:, None] + idx)
            signs.append(np.ones((T, ne)))
        else:
            cols.append(base[:, None] + j[None, :])
            signs.append(np.where(o > 0, 1.0, (-1.0) ** (j[None, :] + 1)))
    if ni:
        cols.append(n_vdof + n_edof + ni * np.arange(T)[:, None] + np.arange(ni)[None, :])
        signs.append(np.ones((T, ni)))
    cell_dofs = np.concatenate(cols, axis=1).astype(np.int64)
    cell_signs = np.concatenate(signs, axis=1)
    return DofMap(
        kind=space_kind,
        degree=r if space_kind == "P" else r - 1,
        ndof=int(ndof),
        cell_dofs=cell_dofs,
        cell_signs=cell_signs,
        vertex_dofs=vertex_dofs,
        edge_dofs=edge_dofs,
        edge_flip=eflip,
        vertex_master=vmaster,
        edge_master=emaster,
    )
