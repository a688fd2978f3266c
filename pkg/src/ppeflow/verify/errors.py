"""L2 and max-over-quadrature-point errors of a discrete state against exact fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..assembly import ROT, default_degree
from ..fem.quadrature import triangle_quadrature
from ..fem.mapping import map_points

QUANTITIES = ("u", "div", "grad_u", "sigma", "curl_sigma", "p", "grad_p")


@dataclass
class ErrorRecord:
    dx: float
    dt: float
    l2: dict = field(default_factory=dict)
    linf: dict = field(default_factory=dict)


def _pointwise_norm(e: np.ndarray, value_rank: int) -> np.ndarray:
    if value_rank == 0:
        return np.abs(e)
    axes = tuple(range(e.ndim - value_rank, e.ndim))
    return np.sqrt(np.sum(e * e, axis=axes))


def compute_errors(state, case, disc, dx: float | None = None, dt: float = 0.0, degree: int | None = None) -> ErrorRecord:
    """Errors at ``state.t``; ``grad_u`` ignores inter-element jumps and the
    pressure error has its domain mean removed first."""
    mesh = disc.mesh
    S, V, P = disc.spaces
    q = triangle_quadrature(degree or default_degree(disc.r))
    x = map_points(mesh, q.points)
    w = q.weights[None, :] * mesh.det_jacobians[:, None]
    t = state.t

    uh, divh, gradh = V.evaluate_ref(state.u, q.points)
    sh, gsh = S.evaluate_ref(state.sigma, q.points)
    ph, gph = P.evaluate_ref(state.p, q.points)
    curlh = np.einsum("ab,tqb->tqa", ROT, gsh)

    ep = ph - case.pressure(x, t)
    ep = ep - np.sum(w * ep) / np.sum(w)
    errs = {
        "u": (uh - case.u(x, t), 1),
        "div": (divh - case.div_u(x, t), 0),
        "grad_u": (gradh - case.grad_u(x, t), 2),
        "sigma": (sh - case.sigma(x, t), 0),
        "curl_sigma": (curlh - case.curl_sigma(x, t), 1),
        "p": (ep, 0),
        "grad_p": (gph - case.grad_p(x, t), 1),
    }
    rec = ErrorRecord(dx if dx is not None else float(mesh.edge_lengths.max()), dt)
    for name, (e, rank) in errs.items():
        pw = _pointwise_norm(e, rank)
        rec.l2[name] = float(np.sqrt(np.sum(w * pw**2)))
        rec.linf[name] = float(pw.max())
    return rec


def l2_norm_of(mesh, func, degree: int = 10) -> float:
    """``||func||_{L2}`` of a scalar ``func(points)`` by the same element quadrature."""
    q = triangle_quadrature(degree)
    x = map_points(mesh, q.points)
    w = q.weights[None, :] * mesh.det_jacobians[:, None]
    v = np.asarray(func(x))
    return float(np.sqrt(np.sum(w * v**2)))
