"""Triangulations of the unit square and the backward-facing-step channel.

Both domains are meshed from a tensor grid of rectangles, each rectangle
split into four triangles through its center ("criss-cross" pattern).
Edges are oriented globally from the lower to the higher vertex index; the
local edge ``l`` of a triangle is the one opposite local vertex ``l``, with
endpoints ``LOCAL_EDGES[l]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

EPS_GEOM = 1e-10

LOCAL_EDGES = np.array([[1, 2], [0, 2], [0, 1]])

BOUNDARY_LABELS = ("wall", "lid", "inflow", "outflow", "periodic_master", "periodic_slave")


class PointNotFoundError(LookupError):
    """Raised when a point lies outside every triangle of a mesh."""


@dataclass
class PointLocation:
    triangle_index: int
    barycentric: np.ndarray


@dataclass(eq=False)
class Mesh:
    """A 2D triangulation with oriented edges and boundary labels.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counter-clockwise
    edges : (E, 2) int array, ``edges[e, 0] < edges[e, 1]``
    triangle_edges : (T, 3) int array, global index of local edge ``l``
    triangle_edge_signs : (T, 3) int array, +1 where the local orientation
        (lower to higher local vertex) agrees with the global one
    boundary_edges : (B,) int array of edges with a single neighbor
    boundary_tags : (B,) str array, label of each boundary edge
    periodic_pairs : (P, 2) int array of (master_edge, slave_edge)
    period : translation taking a master edge onto its slave
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    triangle_edge_signs: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    periodic_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    period: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """(T, 2, 2) affine map Jacobians, columns ``x1 - x0`` and ``x2 - x0``."""
        p = self.vertices[self.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    @cached_property
    def det_jacobians(self) -> np.ndarray:
        J = self.jacobians
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        J = self.jacobians
        det = self.det_jacobians
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 1, 1] = J[:, 0, 0]
        inv[:, 0, 1] = -J[:, 0, 1]
        inv[:, 1, 0] = -J[:, 1, 0]
        return inv / det[:, None, None]

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * self.det_jacobians

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """(E, 2) adjacent triangles; second column is -1 on the boundary."""
        et = -np.ones((self.n_edges, 2), dtype=np.int64)
        flat_e = self.triangle_edges.ravel()
        flat_t = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(flat_e, kind="stable")
        flat_e, flat_t = flat_e[order], flat_t[order]
        first = np.ones(len(flat_e), dtype=bool)
        first[1:] = flat_e[1:] != flat_e[:-1]
        et[flat_e[first], 0] = flat_t[first]
        et[flat_e[~first], 1] = flat_t[~first]
        return et

    @cached_property
    def boundary_local(self) -> tuple[np.ndarray, np.ndarray]:
        """(triangle, local edge index) adjacent to each boundary edge."""
        tri = self.edge_triangles[self.boundary_edges, 0]
        loc = np.argmax(self.triangle_edges[tri] == self.boundary_edges[:, None], axis=1)
        return tri, loc

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        """(B, 2) outward unit normals of the boundary edges."""
        tri, loc = self.boundary_local
        a = self.vertices[self.triangles[tri, LOCAL_EDGES[loc, 0]]]
        b = self.vertices[self.triangles[tri, LOCAL_EDGES[loc, 1]]]
        opposite = self.vertices[self.triangles[tri, loc]]
        t = b - a
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        n /= np.hypot(n[:, 0], n[:, 1])[:, None]
        flip = np.einsum("ij,ij->i", n, opposite - a) > 0
        n[flip] *= -1
        return n

    def min_edge_length(self) -> float:
        return float(self.edge_lengths.min())

    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max())

    def boundary_mask(self, *tags: str) -> np.ndarray:
        """Boolean mask over ``boundary_edges`` selecting the given labels."""
        return np.isin(self.boundary_tags, tags)

    @property
    def physical_boundary(self) -> np.ndarray:
        """Mask of boundary edges that are not periodic."""
        return ~self.boundary_mask("periodic_master", "periodic_slave")

    @cached_property
    def _locator(self) -> "_BucketLocator":
        return _BucketLocator(self)

    def locate_point(self, x) -> PointLocation:
        return locate_point(self, x)

    def locate_points(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized lookup; triangle index is -1 where a point is outside."""
        return self._locator.locate_many(np.atleast_2d(np.asarray(points, dtype=float)))


def _build(vertices: np.ndarray, triangles: np.ndarray) -> dict:
    """Derive edges, local edge signs and boundary edges from a triangle list."""
    local = triangles[:, LOCAL_EDGES]  # (T, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise ValueError("non-manifold triangulation: edge shared by more than two triangles")
    triangle_edges = inverse.reshape(-1, 3)
    signs = np.where(local[:, :, 0] < local[:, :, 1], 1, -1)
    boundary_edges = np.flatnonzero(counts == 1)
    return dict(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_edges=triangle_edges,
        triangle_edge_signs=signs,
        boundary_edges=boundary_edges,
    )


def _diagonal(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split each cell of ``xs x ys`` into 2 triangles along the (1, 1) diagonal."""
    nx = len(xs) - 1
    I, J = np.meshgrid(np.arange(nx), np.arange(len(ys) - 1), indexing="xy")
    a = (J * (nx + 1) + I).ravel()
    b, c, d = a + 1, a + nx + 2, a + nx + 1
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    tris = np.stack([np.stack([a, b, c], 1), np.stack([a, c, d], 1)], axis=1).reshape(-1, 3)
    return np.stack([gx.ravel(), gy.ravel()], axis=1), tris


def _criss_cross(xs: np.ndarray, ys: np.ndarray, keep=None) -> tuple[np.ndarray, np.ndarray]:
    """Split each kept cell of the tensor grid ``xs x ys`` into 4 triangles."""
    nx, ny = len(xs) - 1, len(ys) - 1
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    I, J = I.ravel(), J.ravel()
    if keep is not None:
        xc = 0.5 * (xs[I] + xs[I + 1])
        yc = 0.5 * (ys[J] + ys[J + 1])
        mask = keep(xc, yc)
        I, J = I[mask], J[mask]

    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    corners = np.stack([gx.ravel(), gy.ravel()], axis=1)
    n_corner = len(corners)
    centers = np.stack([0.5 * (xs[I] + xs[I + 1]), 0.5 * (ys[J] + ys[J + 1])], axis=1)

    a = J * (nx + 1) + I
    b = a + 1
    c = b + (nx + 1)
    d = a + (nx + 1)
    m = n_corner + np.arange(len(I))
    tris = np.stack(
        [
            np.stack([a, b, m], axis=1),
            np.stack([b, c, m], axis=1),
            np.stack([c, d, m], axis=1),
            np.stack([d, a, m], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    vertices = np.vstack([corners, centers])
    used = np.zeros(len(vertices), dtype=bool)
    used[tris.ravel()] = True
    renumber = -np.ones(len(vertices), dtype=np.int64)
    renumber[used] = np.arange(used.sum())
    return vertices[used], renumber[tris]


def _on(value: np.ndarray, target: float, tol: float = 1e-12) -> np.ndarray:
    return np.abs(value - target) < tol


def build_unit_square_mesh(n: int, periodic_x: bool = False, pattern: str = "crossed") -> Mesh:
    """Regular mesh of [0, 1]^2: ``crossed`` gives ``4 n^2`` triangles,
    ``diagonal`` gives ``2 n^2`` split along the (1, 1) direction.

    Boundary labels: ``lid`` on y = 1, ``wall`` elsewhere; with ``periodic_x``
    the x = 0 and x = 1 sides become ``periodic_master`` / ``periodic_slave``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = np.linspace(0.0, 1.0, n + 1)
    if pattern not in ("crossed", "diagonal"):
        raise ValueError(f"unknown mesh pattern {pattern!r}")
    vertices, triangles = (_criss_cross if pattern == "crossed" else _diagonal)(s, s)
    data = _build(vertices, triangles)

    mid = 0.5 * (vertices[data["edges"][data["boundary_edges"], 0]] + vertices[data["edges"][data["boundary_edges"], 1]])
    tags = np.full(len(mid), "wall", dtype="<U16")
    tags[_on(mid[:, 1], 1.0)] = "lid"
    pairs = np.zeros((0, 2), dtype=np.int64)
    period = np.zeros(2)
    if periodic_x:
        left = _on(mid[:, 0], 0.0)
        right = _on(mid[:, 0], 1.0)
        tags[left] = "periodic_master"
        tags[right] = "periodic_slave"
        be = data["boundary_edges"]
        li, ri = np.flatnonzero(left), np.flatnonzero(right)
        li = li[np.argsort(mid[li, 1])]
        ri = ri[np.argsort(mid[ri, 1])]
        if not np.allclose(mid[li, 1], mid[ri, 1], atol=1e-12):
            raise ValueError("periodic sides do not match")
        pairs = np.stack([be[li], be[ri]], axis=1)
        period = np.array([1.0, 0.0])
    return Mesh(**data, boundary_tags=tags, periodic_pairs=pairs, period=period)


def graded_nodes(a: float, b: float, h0: float, ratio: float, h_max: float, fine: str = "a") -> np.ndarray:
    """Nodes on [a, b] with geometric size growth from the ``fine`` end(s).

    ``fine`` is ``"a"``, ``"b"`` or ``"both"``. Cell sizes start at about
    ``h0``, grow by ``ratio`` and saturate at ``h_max``.
    """
    length = b - a
    if fine == "both":
        half = graded_nodes(0.0, 0.5 * length, h0, ratio, h_max, "a")
        sizes = np.diff(half)
        sizes = np.concatenate([sizes, sizes[::-1]])
        return a + np.concatenate([[0.0], np.cumsum(sizes)])
    sizes = []
    h, total = h0, 0.0
    while total < length - 1e-14:
        sizes.append(h)
        total += h
        h = min(h * ratio, max(h_max, h0))
    sizes = np.array(sizes)
    # Rescale to fit the interval exactly, dropping the last cell when that
    # keeps the sizes closer to nominal.
    over = length / sizes.sum()
    if len(sizes) > 1:
        under = length / sizes[:-1].sum()
        if abs(np.log(under)) < abs(np.log(over)):
            sizes, over = sizes[:-1], under
    sizes = sizes * over
    nodes = np.concatenate([[0.0], np.cumsum(sizes)])
    nodes[-1] = length
    if fine == "b":
        nodes = length - nodes[::-1]
    return a + nodes


def build_step_mesh(L: float = 8.0, h_min: float = 1.7028e-2, grading: float = 1.15, h_max: float = 0.125) -> Mesh:
    """Block-structured graded mesh of the backward-facing step channel.

    The domain is ``[0, L] x [-0.5, 0.5]`` minus ``[0, 0.5] x [-0.5, 0]``;
    cells are smallest (size ``h_min``) at the re-entrant corner (0.5, 0)
    and next to the walls behind the step.
    """
    if not L > 0.5:
        raise ValueError("channel length L must exceed 0.5")
    if not 0.0 < h_min < 0.5:
        raise ValueError("h_min must lie in (0, 0.5)")
    if not grading >= 1.0:
        raise ValueError("grading must be >= 1")
    h_max = max(h_max, h_min)
    xs = np.concatenate(
        [
            graded_nodes(0.0, 0.5, h_min, grading, h_max, "b")[:-1],
            graded_nodes(0.5, L, h_min, grading, h_max, "a"),
        ]
    )
    ys = np.concatenate(
        [
            graded_nodes(-0.5, 0.0, h_min, grading, h_max, "both")[:-1],
            graded_nodes(0.0, 0.5, h_min, grading, h_max, "both"),
        ]
    )
    vertices, triangles = _criss_cross(xs, ys, keep=lambda xc, yc: ~((xc < 0.5) & (yc < 0.0)))
    data = _build(vertices, triangles)
    p = vertices[triangles]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    if np.any(det <= 1e-14):
        raise ValueError("step mesh parameters produce degenerate triangles")

    be = data["boundary_edges"]
    mid = 0.5 * (vertices[data["edges"][be, 0]] + vertices[data["edges"][be, 1]])
    tags = np.full(len(be), "wall", dtype="<U16")
    tags[_on(mid[:, 0], 0.0)] = "inflow"
    tags[_on(mid[:, 0], L)] = "outflow"
    return Mesh(**data, boundary_tags=tags)


def step_domain_contains(x: np.ndarray, y: np.ndarray, L: float, tol: float = EPS_GEOM) -> np.ndarray:
    inside_box = (x >= -tol) & (x <= L + tol) & (y >= -0.5 - tol) & (y <= 0.5 + tol)
    in_step = (x < 0.5 - tol) & (y < -tol)
    return inside_box & ~in_step


def on_step_boundary(x: np.ndarray, y: np.ndarray, L: float, tol: float = 1e-12) -> np.ndarray:
    """True where (x, y) lies on the polygonal boundary of the step domain."""
    segments = [
        ((0.0, 0.0), (0.0, 0.5)),
        ((0.0, 0.5), (L, 0.5)),
        ((L, 0.5), (L, -0.5)),
        ((L, -0.5), (0.5, -0.5)),
        ((0.5, -0.5), (0.5, 0.0)),
        ((0.5, 0.0), (0.0, 0.0)),
    ]
    pts = np.stack([x, y], axis=-1)
    hit = np.zeros(len(pts), dtype=bool)
    for a, b in segments:
        a, b = np.array(a), np.array(b)
        t = b - a
        s = np.clip(((pts - a) @ t) / (t @ t), 0.0, 1.0)
        d = pts - (a + s[:, None] * t)
        hit |= np.hypot(d[:, 0], d[:, 1]) < tol
    return hit


def barycentric(mesh: Mesh, tri: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of points ``x`` (N, 2) in triangles ``tri`` (N,)."""
    p0 = mesh.vertices[mesh.triangles[tri, 0]]
    J = mesh.jacobians[tri]
    det = mesh.det_jacobians[tri]
    d = x - p0
    l1 = (J[:, 1, 1] * d[:, 0] - J[:, 0, 1] * d[:, 1]) / det
    l2 = (-J[:, 1, 0] * d[:, 0] + J[:, 0, 0] * d[:, 1]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


class _BucketLocator:
    """Uniform bucket grid over the mesh bounding box."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        lo = mesh.vertices.min(axis=0)
        hi = mesh.vertices.max(axis=0)
        nb = max(1, int(np.sqrt(mesh.n_triangles / 2)))
        self.lo = lo
        self.h = np.maximum((hi - lo) / nb, 1e-300)
        self.nb = nb
        p = mesh.vertices[mesh.triangles]
        bmin = np.floor((p.min(axis=1) - EPS_GEOM - lo) / self.h).astype(np.int64).clip(0, nb - 1)
        bmax = np.floor((p.max(axis=1) + EPS_GEOM - lo) / self.h).astype(np.int64).clip(0, nb - 1)
        buckets: list[list[int]] = [[] for _ in range(nb * nb)]
        for t in range(mesh.n_triangles):
            for j in range(bmin[t, 1], bmax[t, 1] + 1):
                for i in range(bmin[t, 0], bmax[t, 0] + 1):
                    buckets[j * nb + i].append(t)
        self.buckets = [np.array(b, dtype=np.int64) for b in buckets]

    def _bucket(self, pts: np.ndarray) -> np.ndarray:
        ij = np.floor((pts - self.lo) / self.h).astype(np.int64).clip(0, self.nb - 1)
        return ij[:, 1] * self.nb + ij[:, 0]

    def locate_many(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        tri = -np.ones(len(pts), dtype=np.int64)
        bary = np.full((len(pts), 3), np.nan)
        ok = np.all(np.isfinite(pts), axis=1)
        bid = np.full(len(pts), -1, dtype=np.int64)
        bid[ok] = self._bucket(pts[ok])
        for b in np.unique(bid[ok]):
            idx = np.flatnonzero(bid == b)
            cand = self.buckets[b]
            if len(cand) == 0:
                continue
            # (npts, ncand, 3) barycentric coordinates against every candidate
            tt = np.broadcast_to(cand, (len(idx), len(cand))).ravel()
            xx = np.repeat(pts[idx], len(cand), axis=0)
            lam = barycentric(self.mesh, tt, xx).reshape(len(idx), len(cand), 3)
            inside = lam.min(axis=2) >= -EPS_GEOM
            has = inside.any(axis=1)
            first = np.argmax(inside, axis=1)
            sel = idx[has]
            tri[sel] = cand[first[has]]
            bary[sel] = lam[has, first[has]]
        return tri, bary


def locate_point(mesh: Mesh, x) -> PointLocation:
    """Containing triangle (lowest index on ties) and barycentric coordinates."""
    tri, bary = mesh.locate_points(np.asarray(x, dtype=float).reshape(1, 2))
    if tri[0] < 0:
        raise PointNotFoundError(f"point {tuple(np.ravel(x))} is outside the mesh")
    return PointLocation(int(tri[0]), bary[0])
