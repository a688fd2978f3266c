"""Lid-driven cavity and backward-facing step drivers with post-processing."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import BoundaryData
from .imex import ImexPair, imex443
from .mesh import Mesh, build_step_mesh, build_unit_square_mesh
from .solver import Discretization, FieldState, ProblemSpec, steady_state

log = logging.getLogger(__name__)

STEP_HEIGHT = 0.5
STEADY_TOL = 1e-8


class ReattachmentError(ValueError):
    """No recirculation-to-attached sign change along the lower wall."""


@dataclass
class StreamlineSet:
    seeds: np.ndarray
    lines: list  # one (m_k, 2) array per seed
    ds: float


@dataclass
class BenchmarkResult:
    state: FieldState
    disc: Discretization
    residual: float
    converged: bool
    steps: int
    profiles: dict = field(default_factory=dict)
    ratio: float | None = None


# ----------------------------------------------------------------------------
# cavity


def cavity_boundary() -> BoundaryData:
    lid = lambda x, t: np.column_stack([np.ones(len(x)), np.zeros(len(x))])
    zero = lambda x, t: np.zeros((len(x), 2))
    return BoundaryData({"lid": lid}, {"lid": zero})


def centerline_profiles(disc: Discretization, u: np.ndarray, n_samples: int = 128) -> dict:
    """``u(0.5, y)`` and ``v(x, 0.5)`` at ``n_samples`` uniform points on [0, 1]."""
    s = np.linspace(0.0, 1.0, n_samples)
    vert = np.column_stack([np.full(n_samples, 0.5), s])
    horiz = np.column_stack([s, np.full(n_samples, 0.5)])
    uv, _, _ = disc.V.evaluate_at(u, vert)
    vv, _, _ = disc.V.evaluate_at(u, horiz)
    return {"s": s, "u_vertical": uv[:, 0], "v_horizontal": vv[:, 1]}


def run_cavity(Re: float, n: int = 64, r: int = 3, dt_factor: float = 0.8, lam: float = 10.0,
               tol: float = STEADY_TOL, max_steps: int = 200000, pair: ImexPair | None = None,
               n_samples: int = 128, callback=None, **spec_kw) -> BenchmarkResult:
    if not Re > 0:
        raise ValueError("Re must be positive")
    mesh = build_unit_square_mesh(n)
    spec = ProblemSpec(**{"nu": 1.0 / Re, "lam": lam, "bc": cavity_boundary(), "nonlinear": True, **spec_kw})
    disc = Discretization(mesh, r, spec)
    res = steady_state(spec, mesh, r, dt_factor / n, pair or imex443(), tol, max_steps, disc, callback)
    out = BenchmarkResult(res.state, disc, res.residual, res.converged, res.steps)
    out.profiles = centerline_profiles(disc, res.state.u, n_samples)
    return out


# ----------------------------------------------------------------------------
# backward-facing step


def ramp(t: float) -> float:
    return 1.0 - math.exp(-6.0 * t * t)


def ramp_rate(t: float) -> float:
    return 12.0 * t * math.exp(-6.0 * t * t)


def step_boundary() -> BoundaryData:
    def inflow(x, t, scale=ramp):
        y = x[:, 1]
        return np.column_stack([scale(t) * 12.0 * y * (1.0 - 2.0 * y), np.zeros(len(x))])

    def outflow(x, t, scale=ramp):
        y = x[:, 1]
        return np.column_stack([scale(t) * (-3.0 * y * y + 0.75), np.zeros(len(x))])

    return BoundaryData(
        {"inflow": inflow, "outflow": outflow},
        {"inflow": lambda x, t: inflow(x, t, ramp_rate), "outflow": lambda x, t: outflow(x, t, ramp_rate)},
    )


def wall_offset(mesh: Mesh) -> float:
    """Twice the median height of lower-wall elements behind the step."""
    tri, _ = mesh.boundary_local
    be = mesh.boundary_edges
    a = mesh.vertices[mesh.edges[be, 0]]
    b = mesh.vertices[mesh.edges[be, 1]]
    lower = (np.abs(a[:, 1] + 0.5) < 1e-12) & (np.abs(b[:, 1] + 0.5) < 1e-12) & (np.minimum(a[:, 0], b[:, 0]) >= 0.5 - 1e-12)
    if not lower.any():
        raise ValueError("mesh has no lower wall behind the step")
    heights = 2.0 * mesh.areas[tri[lower]] / mesh.edge_lengths[be[lower]]
    return 2.0 * float(np.median(heights))


def find_reattachment(ux, x0: float, x1: float, n_samples: int = 2000, tol: float = 1e-6) -> float:
    """Last negative-to-positive crossing of ``ux(x)`` on ``(x0, x1)``, refined by bisection."""
    xs = np.linspace(x0, x1, n_samples + 2)[1:-1]
    vals = np.asarray(ux(xs), dtype=float)
    ok = np.isfinite(vals)
    xs, vals = xs[ok], vals[ok]
    idx = np.flatnonzero((vals[:-1] < 0) & (vals[1:] >= 0))
    if len(idx) == 0:
        raise ReattachmentError("no negative-to-positive sign change of u_x along the lower wall")
    lo, hi = xs[idx[-1]], xs[idx[-1] + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(ux(np.array([mid]))[0]) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reattachment_length(state: FieldState, disc: Discretization, L: float, n_samples: int = 2000) -> float:
    """``L1 / S`` from near-wall ``u_x`` at ``y = -0.5 + delta_w``."""
    y = -0.5 + wall_offset(disc.mesh)

    def ux(xs):
        pts = np.column_stack([xs, np.full(len(xs), y)])
        return disc.V.evaluate_at(state.u, pts)[0][:, 0]

    x_r = find_reattachment(ux, STEP_HEIGHT, L, n_samples)
    return (x_r - 0.5) / STEP_HEIGHT


def run_step(Re: float, L: float = 8.0, h_min: float = 1.7028e-2, r: int = 3, dt_factor: float = 0.02,
             lam: float = 10.0, tol: float = STEADY_TOL, max_steps: int = 10**7, grading: float = 1.15,
             h_max: float = 0.125, pair: ImexPair | None = None, callback=None, **spec_kw) -> BenchmarkResult:
    if not Re > 0:
        raise ValueError("Re must be positive")
    mesh = build_step_mesh(L, h_min, grading, h_max)
    bc = step_boundary()
    bc.check_zero_flux(mesh)
    spec = ProblemSpec(**{"nu": 1.0 / Re, "lam": lam, "bc": bc, "nonlinear": True, **spec_kw})
    disc = Discretization(mesh, r, spec)
    res = steady_state(spec, mesh, r, dt_factor * h_min, pair or imex443(), tol, max_steps, disc, callback)
    out = BenchmarkResult(res.state, disc, res.residual, res.converged, res.steps)
    out.ratio = reattachment_length(res.state, disc, L)
    return out


# ----------------------------------------------------------------------------
# streamlines


def trace_streamlines(state: FieldState, disc: Discretization, seeds, ds: float = 1e-3,
                      max_steps: int = 10000) -> StreamlineSet:
    """Classical RK4 for ``dx/ds = u_h(x)``; a line stops when any stage leaves the mesh."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    V = disc.V

    def vel(p):
        return V.evaluate_at(state.u, p)[0]

    pos = seeds.copy()
    alive = np.all(np.isfinite(vel(pos)), axis=1)
    lines = [[p.copy()] for p in pos]
    for _ in range(max_steps):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        x = pos[idx]
        k1 = vel(x)
        k2 = vel(x + 0.5 * ds * k1)
        k3 = vel(x + 0.5 * ds * k2)
        k4 = vel(x + ds * k3)
        new = x + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ok = np.all(np.isfinite(new), axis=1) & np.all(np.isfinite(vel(new)), axis=1)
        for j, i in enumerate(idx):
            if ok[j]:
                pos[i] = new[j]
                lines[i].append(new[j].copy())
        alive[idx[~ok]] = False
    return StreamlineSet(seeds, [np.array(l) for l in lines], ds)
