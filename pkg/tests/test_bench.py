import numpy as np
import pytest

from ppeflow.assembly import BoundaryData
from ppeflow.bench import (
    ReattachmentError,
    find_reattachment,
    ramp,
    ramp_rate,
    run_cavity,
    step_boundary,
    trace_streamlines,
    wall_offset,
)
from ppeflow.fem.quadrature import edge_quadrature
from ppeflow.mesh import build_step_mesh, build_unit_square_mesh
from ppeflow.solver import Discretization, FieldState, ProblemSpec


def test_synthetic_reattachment():
    # u_x < 0 in the bubble (0.5, 3.5), positive downstream
    ux = lambda x: -np.sin(np.pi * (x - 0.5) / 3)
    x_r = find_reattachment(ux, 0.5, 5.0)
    assert abs(x_r - 3.5) < 1e-6
    assert (x_r - 0.5) / 0.5 == pytest.approx(6.0, abs=1e-5)
    with pytest.raises(ReattachmentError):
        find_reattachment(lambda x: 1.0 + 0 * x, 0.5, 8.0)


def test_last_crossing_is_used():
    # two bubbles: crossings at 1.5 and 4.0; the downstream one wins
    ux = lambda x: np.where(x < 1.5, -1.0, np.where(x < 3.0, 1.0, np.where(x < 4.0, -1.0, 1.0))) * (1 + 0 * x)
    assert abs(find_reattachment(ux, 0.5, 6.0) - 4.0) < 1e-5


def rotation_state(r=2):
    mesh = build_unit_square_mesh(4)
    disc = Discretization(mesh, r, ProblemSpec(ppe_enabled=False))
    u = disc.V.interpolate(lambda x: np.stack([-(x[..., 1] - 0.5), x[..., 0] - 0.5], axis=-1))
    return FieldState(np.zeros(disc.S.ndof), u, np.zeros(disc.P.ndof), 0.0), disc


def test_streamline_closes_on_circle():
    state, disc = rotation_state()
    seed = np.array([[0.8, 0.5]])
    n = int(round(2 * np.pi / 1e-3))
    lines = trace_streamlines(state, disc, seed, ds=2 * np.pi / n, max_steps=n)
    line = lines.lines[0]
    assert len(line) == n + 1
    assert np.linalg.norm(line[-1] - seed[0]) < 1e-3
    radius = np.linalg.norm(line - 0.5, axis=1)
    assert np.abs(radius - 0.3).max() < 1e-9


def test_streamline_rk4_order():
    state, disc = rotation_state()
    seed = np.array([[0.8, 0.5]])
    S = 3.2
    errs = []
    for n in (16, 32, 64):
        end = trace_streamlines(state, disc, seed, ds=S / n, max_steps=n).lines[0][-1]
        exact = 0.5 + 0.3 * np.array([np.cos(S), np.sin(S)])
        errs.append(np.linalg.norm(end - exact))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert slopes.min() >= 3.8


def test_streamline_edge_cases():
    state, disc = rotation_state()
    zero = FieldState(state.sigma, 0 * state.u, state.p, 0.0)
    lines = trace_streamlines(zero, disc, [[0.3, 0.4]], ds=0.1, max_steps=5)
    assert np.allclose(lines.lines[0], [0.3, 0.4])
    out = FieldState(state.sigma, disc.V.interpolate(lambda x: np.stack([1 + 0 * x[..., 0], 0 * x[..., 1]], -1)), state.p, 0.0)
    lines = trace_streamlines(out, disc, [[0.5, 0.5], [2.0, 2.0]], ds=0.05, max_steps=100)
    assert 9 <= len(lines.lines[0]) <= 11  # leaves through x = 1
    assert np.all(lines.lines[0][:, 0] <= 1 + 1e-10)
    assert len(lines.lines[1]) == 1  # seed outside the mesh


def test_step_inflow_outflow_balance():
    assert ramp(0.0) == 0.0 and ramp_rate(0.0) == 0.0
    assert ramp(10.0) == pytest.approx(1.0)
    h = 1e-6
    assert ramp_rate(0.3) == pytest.approx((ramp(0.3 + h) - ramp(0.3 - h)) / (2 * h), rel=1e-6)
    bc = step_boundary()
    mesh = build_step_mesh(L=2.0, h_min=0.1, grading=1.2, h_max=0.25)
    for t in (0.1, 0.5, 3.0):
        assert abs(bc.net_flux(mesh, t)) < 1e-12
    # inflow integral int_0^{1/2} 12 y (1 - 2 y) dy = 1/2 equals the outflow integral
    g, w = np.polynomial.legendre.leggauss(6)
    y_in = 0.25 * (g + 1)
    y_out = 0.5 * g
    assert np.sum(0.25 * w * 12 * y_in * (1 - 2 * y_in)) == pytest.approx(0.5, abs=1e-14)
    assert np.sum(0.5 * w * (-3 * y_out**2 + 0.75)) == pytest.approx(0.5, abs=1e-14)
    assert 0 < wall_offset(mesh) < 0.5


def test_cavity_with_zero_lid_stays_at_rest():
    zero = BoundaryData.on_tags(lambda x, t: np.zeros((len(x), 2)), lambda x, t: np.zeros((len(x), 2)), ["lid"])
    res = run_cavity(100.0, n=4, r=1, bc=zero, n_samples=9)
    assert res.converged and res.steps == 1
    assert not res.state.u.any() and not res.profiles["u_vertical"].any()


def reflection_gap(res):
    d = res.disc
    p = np.random.default_rng(0).uniform(0.01, 0.99, (200, 2))
    q = p.copy()
    q[:, 0] = 1 - q[:, 0]
    a = d.V.evaluate_at(res.state.u, p)[0]
    b = d.V.evaluate_at(res.state.u, q)[0]
    return max(np.abs(a[:, 0] - b[:, 0]).max(), np.abs(a[:, 1] + b[:, 1]).max()) / np.abs(a).max()


def test_stokes_limit_cavity_symmetry():
    """Steady Stokes is reversible, so u_x is even and u_y odd about x = 1/2."""
    stokes = run_cavity(1.0, n=4, r=2, tol=1e-10, n_samples=33, nonlinear=False)
    assert stokes.converged and reflection_gap(stokes) < 1e-10
    low_re = run_cavity(1.0, n=4, r=2, tol=1e-8, n_samples=33)
    assert low_re.converged and 1e-8 < reflection_gap(low_re) < 0.05
    u = low_re.profiles["u_vertical"]
    assert u[-1] > 0.9 and u[len(u) // 2] < 0  # lid layer and return flow


def test_boundary_normal_error_drops_with_lambda():
    def abs_flux(res):
        disc, mesh = res.disc, res.disc.mesh
        eq = edge_quadrature(6)
        total = 0.0
        for k, e in enumerate(mesh.boundary_edges):
            a, b = mesh.vertices[mesh.edges[e]]
            x = a + eq.points * (b - a)
            v, _, _ = disc.V.evaluate_at(res.state.u, x, tris=np.full(len(x), mesh.edge_triangles[e, 0]))
            total += np.linalg.norm(b - a) * np.sum(eq.weights * np.abs(v @ mesh.boundary_normals[k]))
        return total

    f10 = abs_flux(run_cavity(1.0, n=4, r=2, lam=10.0, n_samples=3))
    f30 = abs_flux(run_cavity(1.0, n=4, r=2, lam=30.0, n_samples=3))
    assert f30 < f10


def test_bad_reynolds():
    with pytest.raises(ValueError):
        run_cavity(0.0, n=2)
