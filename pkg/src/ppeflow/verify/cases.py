"""Manufactured solutions built from a stream function ``psi`` and pressure ``p``.

``u = (psi_y, -psi_x)``, ``sigma = curl u = -lap psi`` and
``f = u_t - nu lap u + grad p [+ (u.grad) u]``. Every case also carries
plain numpy expressions of ``psi`` and ``p`` that the finite-difference
oracle uses as an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..assembly import BoundaryData
from ..mesh import Mesh, build_unit_square_mesh
from .fields import ZERO, Field, Fn1D, sin_sum

PI = math.pi


@dataclass
class ManufacturedCase:
    name: str
    psi: Field
    p: Field
    psi_expr: Callable  # (x, y, t) -> psi, written independently of the field algebra
    p_expr: Callable
    nu: float = 1.0
    nonlinear: bool = False
    periodic_x: bool = False
    ppe_enabled: bool = True
    lam: float = 10.0
    dt: float | None = None  # fixed step; None means dt_factor * dx
    dt_factor: float | None = None
    T: float = 1e-3
    _cache: dict = field(default_factory=dict, repr=False)

    def _f(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # --- derived fields ---------------------------------------------------
    @property
    def u_fields(self) -> tuple[Field, Field]:
        return self._f("u", lambda: (self.psi.d("y"), -self.psi.d("x")))

    @property
    def sigma_field(self) -> Field:
        return self._f("sigma", lambda: -self.psi.laplacian())

    @property
    def forcing_fields(self) -> tuple[Field, Field]:
        def build():
            u1, u2 = self.u_fields
            out = []
            for ua, pd in ((u1, "x"), (u2, "y")):
                fa = ua.d("t") - ua.laplacian() * self.nu + self.p.d(pd)
                if self.nonlinear:
                    fa = fa + u1 * ua.d("x") + u2 * ua.d("y")
                out.append(fa)
            return tuple(out)

        return self._f("forcing", build)

    # --- evaluators (points (..., 2), t) ---------------------------------
    @staticmethod
    def _vec(fa: Field, fb: Field, x, t):
        return np.stack([fa(x, t), fb(x, t)], axis=-1)

    def u(self, x, t=0.0):
        return self._vec(*self.u_fields, x, t)

    def u_t(self, x, t=0.0):
        u1, u2 = self.u_fields
        return self._vec(u1.d("t"), u2.d("t"), x, t)

    def grad_u(self, x, t=0.0):
        """``[..., a, b] = d u_a / d x_b``."""
        u1, u2 = self.u_fields
        rows = [self._vec(ua.d("x"), ua.d("y"), x, t) for ua in (u1, u2)]
        return np.stack(rows, axis=-2)

    def div_u(self, x, t=0.0):
        g = self.grad_u(x, t)
        return g[..., 0, 0] + g[..., 1, 1]

    def sigma(self, x, t=0.0):
        return self.sigma_field(x, t)

    def curl_sigma(self, x, t=0.0):
        s = self.sigma_field
        return self._vec(s.d("y"), -s.d("x"), x, t)

    def pressure(self, x, t=0.0):
        return self.p(x, t)

    def grad_p(self, x, t=0.0):
        return self._vec(self.p.d("x"), self.p.d("y"), x, t)

    def f(self, x, t=0.0):
        return self._vec(*self.forcing_fields, x, t)

    def laplacian_u(self, x, t=0.0):
        u1, u2 = self.u_fields
        return self._vec(u1.laplacian(), u2.laplacian(), x, t)

    # --- problem setup ----------------------------------------------------
    def mesh(self, n: int) -> Mesh:
        return build_unit_square_mesh(n, periodic_x=self.periodic_x)

    def boundary_data(self, mesh: Mesh) -> BoundaryData:
        tags = sorted(set(mesh.boundary_tags[mesh.physical_boundary].tolist()))
        return BoundaryData.on_tags(self.u, self.u_t, tags)

    def problem(self, mesh: Mesh, lam: float | None = None, **overrides):
        from ..solver import ProblemSpec

        kw = dict(
            nu=self.nu,
            lam=self.lam if lam is None else lam,
            f=self.f,
            bc=self.boundary_data(mesh),
            u0=lambda x: self.u(x, 0.0),
            nonlinear=self.nonlinear,
            ppe_enabled=self.ppe_enabled,
        )
        kw.update(overrides)
        return ProblemSpec(**kw)

    def time_step(self, n: int) -> float:
        if self.dt is not None:
            return self.dt
        return self.dt_factor / n


def _bump(power: int = 4) -> Fn1D:
    """``(4 s (1 - s))^power``."""
    return Fn1D.poly([0.0, 4.0, -4.0]) ** power


def _sin2(k: float) -> Fn1D:
    """``sin^2(k s) = (1 - cos 2ks) / 2``."""
    return Fn1D.const(0.5) - Fn1D.cos(2 * k, 0.5)


def _b(s):
    return (4 * s * (1 - s)) ** 4


def case_vhe() -> ManufacturedCase:
    psi = sin_sum(4 * PI, Fn1D.cos(1.0), _bump())
    return ManufacturedCase(
        "vhe", psi, ZERO,
        psi_expr=lambda x, y, t: np.cos(t) * np.sin(4 * PI * (x + y)) * _b(y),
        p_expr=lambda x, y, t: np.zeros_like(x),
        periodic_x=True, ppe_enabled=False, lam=0.0, dt=1e-5, T=1e-3,
    )


def case_stokes_spatial() -> ManufacturedCase:
    psi = sin_sum(4 * PI, Fn1D.cos(1.0), _bump())
    p = sin_sum(4 * PI, Fn1D.cos(1.0), _bump(), cosine=True)
    return ManufacturedCase(
        "stokes-spatial", psi, p,
        psi_expr=lambda x, y, t: np.cos(t) * np.sin(4 * PI * (x + y)) * _b(y),
        p_expr=lambda x, y, t: np.cos(t) * np.cos(4 * PI * (x + y)) * _b(y),
        periodic_x=True, lam=10.0, dt=1e-5, T=1e-3,
    )


def case_stokes_temporal() -> ManufacturedCase:
    T200 = Fn1D.cos(200.0)
    psi = Field.separable(T200, _sin2(PI), _sin2(PI))
    p = Field.separable(T200, Fn1D.sin(2 * PI), Fn1D.sin(PI))
    return ManufacturedCase(
        "stokes-temporal", psi, p,
        psi_expr=lambda x, y, t: np.cos(200 * t) * np.sin(PI * x) ** 2 * np.sin(PI * y) ** 2,
        p_expr=lambda x, y, t: np.cos(200 * t) * np.sin(2 * PI * x) * np.sin(PI * y),
        periodic_x=True, lam=10.0, dt=2.0**-7, T=0.5,
    )


def _full_square(name: str, nonlinear: bool) -> ManufacturedCase:
    b = _bump()
    psi = Field.separable(Fn1D.cos(1.0), _sin2(PI) * b, _sin2(PI) * b)
    p = Field.separable(Fn1D.cos(1.0, PI), Fn1D.cos(PI) * b, Fn1D.sin(PI) * b)
    return ManufacturedCase(
        name, psi, p,
        psi_expr=lambda x, y, t: np.cos(t) * np.sin(PI * x) ** 2 * np.sin(PI * y) ** 2 * _b(x) * _b(y),
        p_expr=lambda x, y, t: PI * np.cos(t) * np.cos(PI * x) * np.sin(PI * y) * _b(x) * _b(y),
        nonlinear=nonlinear, lam=30.0, dt_factor=0.2, T=3.0,
    )


def case_full_square() -> ManufacturedCase:
    return _full_square("full-square", False)


def case_nonlinear_advdiff() -> ManufacturedCase:
    c = case_vhe()
    c.name = "nonlinear-advdiff"
    c.nonlinear = True
    return c


def case_full_ns() -> ManufacturedCase:
    return _full_square("full-ns", True)


CASES = {
    "vhe": case_vhe,
    "stokes-spatial": case_stokes_spatial,
    "stokes-temporal": case_stokes_temporal,
    "full-square": case_full_square,
    "nonlinear-advdiff": case_nonlinear_advdiff,
    "full-ns": case_full_ns,
}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


# ----------------------------------------------------------------------------
# finite-difference oracle


def _fd(fun, x, t, var: str, h: float):
    """4th-order central difference of ``fun(x, t)`` in ``var``."""
    def at(k):
        if var == "t":
            return fun(x, t + k * h)
        dx = np.zeros(2)
        dx["xy".index(var)] = k * h
        return fun(x + dx, t)

    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h)


def fd_check(case: ManufacturedCase, points: np.ndarray, times: np.ndarray, h: float = 1e-4) -> dict[str, float]:
    """Largest relative mismatch ``|a - b| / max(1, |b|)`` per checked quantity.

    Every closed-form derivative is compared with a central difference of the
    level below it; the base level is the independent numpy expression.
    """
    worst: dict[str, float] = {}

    def rel(name, a, b):
        err = np.abs(a - b) / np.maximum(1.0, np.abs(b))
        worst[name] = max(worst.get(name, 0.0), float(np.max(err)))

    psi = lambda x, t: case.psi_expr(x[..., 0], x[..., 1], t)
    pex = lambda x, t: case.p_expr(x[..., 0], x[..., 1], t)
    x = np.asarray(points, dtype=float)
    t = np.asarray(times, dtype=float)
    rel("psi", case.psi(x, t), psi(x, t))
    rel("p", case.pressure(x, t), pex(x, t))
    u_fd = np.stack([_fd(psi, x, t, "y", h), -_fd(psi, x, t, "x", h)], axis=-1)
    rel("u", case.u(x, t), u_fd)
    g_fd = np.stack([_fd(case.u, x, t, "x", h), _fd(case.u, x, t, "y", h)], axis=-1)
    rel("grad_u", case.grad_u(x, t), g_fd)
    ut_fd = _fd(case.u, x, t, "t", h)
    rel("u_t", case.u_t(x, t), ut_fd)
    gx = lambda y, s: case.grad_u(y, s)[..., :, 0]
    gy = lambda y, s: case.grad_u(y, s)[..., :, 1]
    lap_fd = _fd(gx, x, t, "x", h) + _fd(gy, x, t, "y", h)
    rel("laplacian_u", case.laplacian_u(x, t), lap_fd)
    gp_fd = np.stack([_fd(pex, x, t, "x", h), _fd(pex, x, t, "y", h)], axis=-1)
    rel("grad_p", case.grad_p(x, t), gp_fd)
    sig_fd = g_fd[..., 1, 0] - g_fd[..., 0, 1]
    rel("sigma", case.sigma(x, t), sig_fd)
    cs_fd = np.stack([_fd(case.sigma, x, t, "y", h), -_fd(case.sigma, x, t, "x", h)], axis=-1)
    rel("curl_sigma", case.curl_sigma(x, t), cs_fd)
    f_fd = ut_fd - case.nu * lap_fd + gp_fd
    if case.nonlinear:
        f_fd = f_fd + np.einsum("nab,nb->na", g_fd, case.u(x, t))
    rel("f", case.f(x, t), f_fd)
    rel("div_u", case.div_u(x, t), np.zeros(1))
    return worst
