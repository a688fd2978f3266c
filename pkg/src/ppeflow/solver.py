"""Time integration of the PPE-reformulated Navier-Stokes system.

The viscous operator acts implicitly through the coupled (sigma, u) stage
system; pressure and advection are explicit. Each implicit stage solves

    M_sigma sigma - C u                         = b_sigma(t_i)
    nu dt a C^T sigma + (M_u + nu dt a D) u     = M_u u^n + dt (sum a G + sum a_hat F)

with the first row scaled by ``-nu dt a`` so the block matrix is symmetric.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import scipy.sparse as sp

from .assembly import (
    BoundaryData,
    assemble_advection,
    assemble_pressure_rhs,
    assemble_sigma_boundary_rhs,
    assemble_system,
    load_vector,
)
from .fem.space import boundary_quadrature, make_spaces
from .imex import ImexPair, imex443
from .linalg import factorize
from .mesh import Mesh
from .pressure import build_augmented, solve_pressure

log = logging.getLogger(__name__)

COEFF_LIMIT = 1e12
DIV_BLOWUP = 1e3


class NumericalFailure(ArithmeticError):
    """NaN, overflow or divergence blowup during time stepping."""


@dataclass
class ProblemSpec:
    nu: float = 1.0
    lam: float = 0.0
    f: Callable | None = None  # f(points (N, 2), t) -> (N, 2)
    bc: BoundaryData | None = None
    u0: Callable | None = None  # u0(points (N, 2)) -> (N, 2)
    nonlinear: bool = False
    pressure_form: str = "weak1"
    ppe_enabled: bool = True
    solver: str = "direct"
    constraint: str = "mass"

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.pressure_form not in ("weak1", "weak2"):
            raise ValueError(f"unknown pressure form {self.pressure_form!r}")


@dataclass
class FieldState:
    sigma: np.ndarray
    u: np.ndarray
    p: np.ndarray
    t: float

    def copy(self) -> "FieldState":
        return FieldState(self.sigma.copy(), self.u.copy(), self.p.copy(), self.t)


class Discretization:
    """Spaces, matrices and the pressure factorization for one mesh and degree."""

    def __init__(self, mesh: Mesh, r: int, spec: ProblemSpec):
        self.mesh = mesh
        self.r = r
        self.spec = spec
        self.spaces = make_spaces(mesh, r)
        self.S, self.V, self.P = self.spaces
        self.mats = assemble_system(mesh, self.spaces, r)
        self.pressure = (
            build_augmented(self.mats.K, self.P.dofmap, self.mats.mean_p, spec.constraint, spec.solver)
            if spec.ppe_enabled
            else None
        )
        self._mass_sigma = None
        self._mass_u = None
        self._flux = None

    @property
    def mass_sigma(self):
        if self._mass_sigma is None:
            self._mass_sigma = factorize(self.mats.M_sigma, self.spec.solver, symmetric=True)
        return self._mass_sigma

    @property
    def mass_u(self):
        if self._mass_u is None:
            self._mass_u = factorize(self.mats.M_u, self.spec.solver, symmetric=True)
        return self._mass_u

    @property
    def flux_vector(self) -> np.ndarray:
        """``phi`` with ``phi @ u = int_{boundary} n . u_h ds`` (non-periodic edges)."""
        if self._flux is None:
            V = self.V
            out = np.zeros(V.ndof)
            for grp in boundary_quadrature(self.mesh, 2 * self.r).groups:
                vals, _, _ = V.boundary_basis(grp)  # (B, i, q, 2)
                local = np.einsum("bq,biqa,ba->bi", grp["w"], vals, grp["n"])
                out += np.bincount(V.dofmap.cell_dofs[grp["tris"]].ravel(), local.ravel(), minlength=V.ndof)
            self._flux = out
        return self._flux

    def sigma_rhs(self, t: float) -> np.ndarray:
        return assemble_sigma_boundary_rhs(self.mesh, self.S, self.spec.bc, t)

    def sigma_from_u(self, u: np.ndarray, t: float) -> np.ndarray:
        return self.mass_sigma.solve(self.mats.C @ u + self.sigma_rhs(t))

    def solve_p(self, sigma: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
        if self.pressure is None:
            return np.zeros(self.P.ndof)
        spec = self.spec
        F = assemble_pressure_rhs(
            self.mesh, self.spaces, spec.pressure_form, sigma, u, spec.f, spec.bc, spec.lam, t,
            nu=spec.nu, nonlinear=spec.nonlinear,
        )
        p, _ = solve_pressure(self.pressure, F)
        return p

    # diagnostics
    def div_l2(self, u: np.ndarray) -> float:
        return math.sqrt(max(float(u @ (self.mats.D @ u)), 0.0))

    def boundary_flux(self, u: np.ndarray) -> float:
        return float(self.flux_vector @ u)

    def kinetic_energy(self, u: np.ndarray) -> float:
        return 0.5 * float(u @ (self.mats.M_u @ u))

    def u_l2(self, u: np.ndarray) -> float:
        return math.sqrt(max(float(u @ (self.mats.M_u @ u)), 0.0))


# ----------------------------------------------------------------------------
# generic IMEX stepping


class ImexSystem(Protocol):
    """What :func:`imex_advance` needs from a semi-discrete system ``M y' = g(y) + f(y)``."""

    def mass(self, y): ...
    def implicit(self, y): ...
    def explicit(self, y, t: float): ...
    def solve_stage(self, rhs, t: float, dta: float): ...
    def solve_mass(self, rhs, t: float): ...


def imex_advance(system, y, t: float, dt: float, pair: ImexPair, F0=None):
    """One IMEX step; returns ``(y_new, F_new)`` where ``F_new`` is the explicit
    vector at ``y_new`` when it was computed (reusable as the next ``F0``)."""
    s = pair.s
    A, Ah, c = pair.A, pair.A_hat, pair.c
    My = system.mass(y)
    Fs = [system.explicit(y, t) if F0 is None else F0]
    Gs = []
    stage = y
    for i in range(s):
        rhs = My.copy()
        for j in range(i):
            if A[i, j] != 0.0:
                rhs += dt * A[i, j] * Gs[j]
        for j in range(i + 1):
            if Ah[i + 1, j] != 0.0:
                rhs += dt * Ah[i + 1, j] * Fs[j]
        stage = system.solve_stage(rhs, t + c[i] * dt, dt * A[i, i])
        Gs.append(system.implicit(stage))
        if i < s - 1 or pair.b_hat[s] != 0.0 or pair.stiffly_accurate:
            Fs.append(system.explicit(stage, t + c[i] * dt))
    if pair.stiffly_accurate:
        return stage, Fs[s]
    rhs = My.copy()
    for j in range(s):
        rhs += dt * pair.b[j] * Gs[j]
    for j in range(len(Fs)):
        if pair.b_hat[j] != 0.0:
            rhs += dt * pair.b_hat[j] * Fs[j]
    y_new = system.solve_mass(rhs, t + dt)
    return y_new, None


@dataclass
class ScalarSystem:
    """``y' = -gamma y + mu y`` with identity mass; the 1x1 reduction of the stepper."""

    gamma: float
    mu: float

    def mass(self, y):
        return np.array(y, dtype=float)

    def implicit(self, y):
        return -self.gamma * y

    def explicit(self, y, t):
        return self.mu * y

    def solve_stage(self, rhs, t, dta):
        return rhs / (1.0 + self.gamma * dta)

    def solve_mass(self, rhs, t):
        return rhs


# ----------------------------------------------------------------------------
# the PDE system


@dataclass
class StageWorkspace:
    """Cached stage factorization keyed on ``(nu * dt * a)``."""

    key: float | None = None
    factorization: object = None
    refactorizations: int = 0


class NSSystem:
    def __init__(self, disc: Discretization, workspace: StageWorkspace | None = None):
        self.disc = disc
        self.ws = workspace or StageWorkspace()
        m = disc.mats
        self._CT = m.C.T.tocsr()

    def _stage_factor(self, dta: float):
        nu = self.disc.spec.nu
        key = nu * dta
        if self.ws.key != key:
            m = self.disc.mats
            k = key
            A = sp.bmat([[-k * m.M_sigma, k * m.C], [k * self._CT, m.M_u + k * m.D]], format="csc")
            self.ws.factorization = factorize(A, self.disc.spec.solver, symmetric=True)
            self.ws.key = key
            self.ws.refactorizations += 1
        return self.ws.factorization

    def mass(self, y: FieldState):
        return self.disc.mats.M_u @ y.u

    def implicit(self, y: FieldState):
        m = self.disc.mats
        return -self.disc.spec.nu * (m.D @ y.u + self._CT @ y.sigma)

    def explicit(self, y: FieldState, t: float):
        F, p = explicit_rhs(self.disc, y.sigma, y.u, t)
        y.p = p
        return F

    def solve_stage(self, rhs, t: float, dta: float) -> FieldState:
        fac = self._stage_factor(dta)
        k = self.disc.spec.nu * dta
        ns = self.disc.S.ndof
        b = np.concatenate([-k * self.disc.sigma_rhs(t), rhs])
        x = fac.solve(b)
        state = FieldState(x[:ns], x[ns:], np.zeros(self.disc.P.ndof), t)
        check_finite(state)
        return state

    def solve_mass(self, rhs, t: float) -> FieldState:
        u = self.disc.mass_u.solve(rhs)
        return FieldState(self.disc.sigma_from_u(u, t), u, np.zeros(self.disc.P.ndof), t)


def check_finite(state: FieldState) -> None:
    for name in ("sigma", "u", "p"):
        v = getattr(state, name)
        if not np.all(np.isfinite(v)):
            raise NumericalFailure(f"non-finite {name} at t={state.t:.6g}")
        if v.size and np.max(np.abs(v)) > COEFF_LIMIT:
            raise NumericalFailure(f"{name} coefficient exceeds {COEFF_LIMIT:g} at t={state.t:.6g}")


def explicit_rhs(disc: Discretization, sigma: np.ndarray, u: np.ndarray, t: float):
    """``F = <f, v> - <(u.grad)u, v> [nonlinear] - G p`` and the stage pressure ``p``."""
    spec = disc.spec
    F = np.zeros(disc.V.ndof) if spec.f is None else load_vector(disc.V, spec.f, t)
    if spec.nonlinear:
        F -= assemble_advection(disc.mesh, disc.V, u)
    p = disc.solve_p(sigma, u, t)
    if spec.ppe_enabled:
        F -= disc.mats.G @ p
    return F, p


# ----------------------------------------------------------------------------
# drivers


def initialize(spec: ProblemSpec, mesh: Mesh, r: int, disc: Discretization | None = None) -> FieldState:
    disc = disc or Discretization(mesh, r, spec)
    u = disc.V.interpolate(lambda x: spec.u0(x)) if spec.u0 is not None else np.zeros(disc.V.ndof)
    sigma = disc.sigma_from_u(u, 0.0)
    state = FieldState(sigma, u, disc.solve_p(sigma, u, 0.0), 0.0)
    check_finite(state)
    return state


def imex_step(state: FieldState, dt: float, pair: ImexPair, system: NSSystem, F0=None):
    """Advance ``state`` by ``dt``; returns ``(new_state, F_new)``."""
    y = state.copy()
    new, F_new = imex_advance(system, y, state.t, dt, pair, F0)
    new.t = state.t + dt
    if F_new is None:
        F_new, new.p = explicit_rhs(system.disc, new.sigma, new.u, new.t)
    check_finite(new)
    return new, F_new


DIAG_COLUMNS = ("step", "t", "div_L2", "boundary_flux", "kinetic_energy")


@dataclass
class RunResult:
    state: FieldState
    diagnostics: np.ndarray  # rows of DIAG_COLUMNS
    disc: Discretization

    def write_diagnostics(self, path) -> None:
        write_diagnostics(self.diagnostics, path)


def write_diagnostics(rows: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(DIAG_COLUMNS)
        for row in rows:
            w.writerow([str(int(row[0]))] + [f"{v:.5e}" for v in row[1:]])


def _diag_row(disc, step, state):
    return (step, state.t, disc.div_l2(state.u), disc.boundary_flux(state.u), disc.kinetic_energy(state.u))


def run(spec: ProblemSpec, mesh: Mesh, r: int, dt: float, T: float, pair: ImexPair | None = None,
        disc: Discretization | None = None, state: FieldState | None = None,
        callback: Callable | None = None) -> RunResult:
    """Step from ``t=0`` (or ``state``) to ``T``; the last step is shortened to land on ``T``."""
    if not (dt > 0 and T >= dt):
        raise ValueError("need T >= dt > 0")
    pair = pair or imex443()
    disc = disc or Discretization(mesh, r, spec)
    state = state if state is not None else initialize(spec, mesh, r, disc)
    system = NSSystem(disc)
    rows = [_diag_row(disc, 0, state)]
    d_bound = DIV_BLOWUP * max(rows[0][2], 1.0)
    F = None
    step = 0
    while state.t < T * (1 - 1e-12):
        h = min(dt, T - state.t)
        state, F = imex_step(state, h, pair, system, F)
        step += 1
        if abs(state.t - T) < 1e-12 * max(T, 1.0):
            state.t = T
        rows.append(_diag_row(disc, step, state))
        if rows[-1][2] > d_bound:
            raise NumericalFailure(f"divergence blowup: {rows[-1][2]:.3e} at t={state.t:.6g}")
        if callback is not None:
            callback(step, state)
    return RunResult(state, np.array(rows, dtype=float), disc)


@dataclass
class SteadyResult:
    state: FieldState
    residual: float
    converged: bool
    history: list = field(default_factory=list)
    steps: int = 0
    disc: Discretization | None = None


def steady_state(spec: ProblemSpec, mesh: Mesh, r: int, dt: float, pair: ImexPair | None = None,
                 tol: float = 1e-8, max_steps: int = 100000, disc: Discretization | None = None,
                 callback: Callable | None = None) -> SteadyResult:
    """March until ``||u^{n+1} - u^n||_{L2} / dt < tol`` or ``max_steps``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    pair = pair or imex443()
    disc = disc or Discretization(mesh, r, spec)
    state = initialize(spec, mesh, r, disc)
    system = NSSystem(disc)
    history = []
    F = None
    d_bound = DIV_BLOWUP * max(disc.div_l2(state.u), 1.0)
    for step in range(1, max_steps + 1):
        new, F = imex_step(state, dt, pair, system, F)
        res = disc.u_l2(new.u - state.u) / dt
        history.append(res)
        state = new
        if disc.div_l2(state.u) > d_bound:
            raise NumericalFailure(f"divergence blowup at t={state.t:.6g}")
        if callback is not None:
            callback(step, state, res)
        if res < tol:
            return SteadyResult(state, res, True, history, step, disc)
    log.warning("steady state not reached after %d steps (residual %.3e)", max_steps, history[-1])
    return SteadyResult(state, history[-1], False, history, max_steps, disc)


