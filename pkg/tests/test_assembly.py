import numpy as np
import pytest

from ppeflow.assembly import (
    ROT,
    BoundaryData,
    assemble_advection,
    assemble_gradp_force,
    assemble_pressure_rhs,
    assemble_sigma_boundary_rhs,
    assemble_system,
)
from ppeflow.fem.space import make_spaces
from ppeflow.mesh import build_unit_square_mesh
from ppeflow.solver import Discretization, FieldState
from ppeflow.verify.cases import get_case
from ppeflow.verify.errors import compute_errors
from _helpers import jittered_square, physical_rule
from test_fem import reference_mesh


def setup(n=3, r=2, jitter=True, periodic=False):
    mesh = jittered_square(n, periodic_x=periodic) if jitter else build_unit_square_mesh(n, periodic_x=periodic)
    spaces = make_spaces(mesh, r)
    return mesh, spaces, assemble_system(mesh, spaces, r)


def test_p1_mass_single_triangle():
    m = reference_mesh(2.0)
    spaces = make_spaces(m, 1)
    M = assemble_system(m, spaces, 1).M_sigma.toarray()
    A = 2.0
    assert np.allclose(M, A / 12 * (np.ones((3, 3)) + np.eye(3)), atol=1e-14)


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("periodic", [False, True])
def test_symmetry_definiteness_kernel(r, periodic):
    mesh, spaces, mats = setup(3, r, periodic=periodic)
    for name in ("M_sigma", "M_u", "D", "K"):
        M = getattr(mats, name)
        assert abs(M - M.T).max() < 1e-13 * abs(M).max(), name
    for name in ("M_sigma", "M_u"):
        assert np.linalg.eigvalsh(getattr(mats, name).toarray()).min() > 0
    for name in ("D", "K"):
        ev = np.linalg.eigvalsh(getattr(mats, name).toarray())
        assert ev.min() > -1e-13 * ev.max()
    ones = np.ones(spaces[2].ndof)
    assert np.abs(mats.K @ ones).max() < 1e-12
    assert np.abs(ones @ mats.K).max() < 1e-12
    ev = np.linalg.eigvalsh(mats.K.toarray())
    assert np.sum(np.abs(ev) < 1e-12 * ev.max()) == 1  # one-dimensional kernel


def test_div_free_field_in_kernel_of_D():
    mesh, (S, V, P), mats = setup(3, 2)
    u = V.interpolate(lambda x: np.stack([x[..., 0], -x[..., 1]], axis=-1))
    assert np.abs(mats.D @ u).max() < 1e-12
    mesh, (S, V, P), mats = setup(3, 1)
    u = V.interpolate(lambda x: np.stack([1.0 + 0 * x[..., 0], 2.0 + 0 * x[..., 1]], axis=-1))
    assert np.abs(mats.D @ u).max() < 1e-12


@pytest.mark.parametrize("r", [1, 3])
def test_curl_adjoint_is_C_transpose(r):
    """Independent element loop for <curl sigma, v> compared with C^T."""
    mesh, (S, V, P), mats = setup(2, r)
    pts, x, w = physical_rule(mesh, 10)
    B = np.zeros((V.ndof, S.ndof))
    phi, dphi = S.element.tabulate(pts)
    psi, _, _ = V.element.tabulate(pts)
    for t in range(mesh.n_triangles):
        J = mesh.jacobians[t]
        Jinv = np.linalg.inv(J)
        det = np.linalg.det(J)
        grad = np.einsum("ba,iqb->iqa", Jinv, dphi)
        curl = np.einsum("ab,iqb->iqa", ROT, grad)
        v = np.einsum("ab,jqb->jqa", J, psi) / det
        local = np.einsum("iqa,jqa,q->ji", curl, v, w[t])
        rows = V.dofmap.cell_dofs[t]
        cols = S.dofmap.cell_dofs[t]
        local *= V.dofmap.cell_signs[t][:, None] * S.dofmap.cell_signs[t][None, :]
        np.add.at(B, (rows[:, None], cols[None, :]), local)
    assert np.abs(B - mats.C.T.toarray()).max() < 1e-12


def test_discrete_divergence_theorem(rng):
    mesh, (S, V, P), mats = setup(4, 2)
    u = rng.normal(size=V.ndof)
    bnd = np.unique(V.dofmap.edge_dofs[mesh.boundary_edges].ravel())
    u[bnd] = 0.0
    q, _, w = V.quadrature(6)
    _, div, _ = V.evaluate_ref(u, q.points)
    assert abs(np.sum(w * div)) < 1e-12


# --- sigma boundary term -----------------------------------------------------------


def boundary_oracle(mesh, S, coeffs, g, n_gauss=12):
    """int tau_c (n x g) ds by a separate loop over boundary edges."""
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    s, gw = 0.5 * (gx + 1), 0.5 * gw
    total = 0.0
    for k, e in enumerate(mesh.boundary_edges):
        a, b = mesh.vertices[mesh.edges[e]]
        x = a + s[:, None] * (b - a)
        n = mesh.boundary_normals[k]
        tri = np.full(len(x), mesh.edge_triangles[e, 0])
        tau, _ = S.evaluate_at(coeffs, x, tris=tri)
        gv = g(x, 0.0)
        nxg = n[0] * gv[:, 1] - n[1] * gv[:, 0]
        total += np.linalg.norm(b - a) * np.sum(gw * tau * nxg)
    return total


def test_sigma_boundary_rhs(rng):
    mesh, (S, V, P), _ = setup(3, 2)
    assert np.all(assemble_sigma_boundary_rhs(mesh, S, None, 0.0) == 0)
    zero = BoundaryData.on_tags(lambda x, t: np.zeros_like(x), lambda x, t: np.zeros_like(x), ["wall", "lid"])
    assert np.all(assemble_sigma_boundary_rhs(mesh, S, zero, 0.0) == 0)
    lid = BoundaryData({"lid": lambda x, t: np.column_stack([np.ones(len(x)), np.zeros(len(x))])})
    b = assemble_sigma_boundary_rhs(mesh, S, lid, 0.0)
    assert np.isclose(b.sum(), -1.0)  # n x g = -1 along a lid of length 1
    on_lid = np.isclose(S.interpolate(lambda x: x[..., 1]), 1.0)
    assert np.abs(b[~on_lid]).max() < 1e-15 and np.all(b[on_lid] < 0)
    rot = lambda x, t: np.column_stack([-x[:, 1], x[:, 0]])
    bc = BoundaryData.on_tags(rot, rot, ["wall", "lid"])
    b = assemble_sigma_boundary_rhs(mesh, S, bc, 0.0)
    c = rng.normal(size=S.ndof)
    assert abs(b @ c - boundary_oracle(mesh, S, c, rot)) < 1e-12


# --- pressure right-hand side ------------------------------------------------------


def test_pressure_rhs_zero_and_constant_force(rng):
    mesh, spaces, _ = setup(3, 2, jitter=False)
    S, V, P = spaces
    z = lambda n: np.zeros(n)
    for form in ("weak1", "weak2"):
        F = assemble_pressure_rhs(mesh, spaces, form, z(S.ndof), z(V.ndof), None, None, 10.0, 0.0)
        assert np.all(F == 0)
    f = lambda x, t: np.column_stack([np.ones(len(x)), np.zeros(len(x))])
    F = assemble_pressure_rhs(mesh, spaces, "weak1", z(S.ndof), z(V.ndof), f, None, 0.0, 0.0)
    c = rng.normal(size=P.ndof)
    # int d(q_c)/dx over the unit square = int_{x=1} q_c dy - int_{x=0} q_c dy
    gx, gw = np.polynomial.legendre.leggauss(6)
    y = (np.arange(3)[:, None] + 0.5 * (gx + 1)).ravel() / 3  # per boundary segment
    gw = np.tile(gw, 3) / 6
    right, _ = P.evaluate_at(c, np.column_stack([np.ones_like(y), y]))
    left, _ = P.evaluate_at(c, np.column_stack([np.zeros_like(y), y]))
    assert abs(F @ c - np.sum(gw * (right - left))) < 1e-12
    with pytest.raises(ValueError):
        assemble_pressure_rhs(mesh, spaces, "weak3", z(S.ndof), z(V.ndof), None, None, 0.0, 0.0)


def test_weak_forms_agree_on_manufactured_state():
    """For continuous sigma_h, <curl sigma_h, grad q> equals the boundary flux term exactly."""
    case = get_case("stokes-temporal")
    errs = []
    for n in (4, 8):
        mesh = case.mesh(n)
        F, e = {}, {}
        for form in ("weak1", "weak2"):
            disc = Discretization(mesh, 3, case.problem(mesh, pressure_form=form))
            S, V, P = disc.spaces
            u = V.interpolate(lambda x: case.u(x, 0.0))
            sigma = disc.sigma_from_u(u, 0.0)
            F[form] = assemble_pressure_rhs(mesh, disc.spaces, form, sigma, u, disc.spec.f, None, 10.0, 0.0)
            p = disc.solve_p(sigma, u, 0.0)
            e[form] = compute_errors(FieldState(sigma, u, p, 0.0), case, disc).l2["p"]
        assert np.abs(F["weak1"] - F["weak2"]).max() < 1e-10 * np.abs(F["weak1"]).max()
        assert abs(e["weak1"] - e["weak2"]) < 1e-10
        errs.append(e["weak1"])
    assert np.log2(errs[0] / errs[1]) > 1.5  # sigma-limited pressure converges at order r - 1


# --- advection and pressure force -------------------------------------------------


def test_advection_examples(rng):
    mesh, (S, V, P), _ = setup(3, 2)
    const = V.interpolate(lambda x: np.stack([1.0 + 0 * x[..., 0], -0.5 + 0 * x[..., 1]], -1))
    assert np.abs(assemble_advection(mesh, V, const)).max() < 1e-12
    shear = V.interpolate(lambda x: np.stack([x[..., 1], 0 * x[..., 0]], -1))
    assert np.abs(assemble_advection(mesh, V, shear)).max() < 1e-12
    strain = V.interpolate(lambda x: np.stack([x[..., 0], -x[..., 1]], -1))
    N = assemble_advection(mesh, V, strain)
    c = rng.normal(size=V.ndof)
    pts, x, w = physical_rule(mesh, 8)
    vc, _, _ = V.evaluate_ref(c, pts)
    assert abs(N @ c - np.sum(w * np.einsum("tqa,tqa->tq", x, vc))) < 1e-12


def test_gradp_force(rng):
    mesh, (S, V, P), mats = setup(3, 3)
    assert np.abs(assemble_gradp_force(mesh, V, P, np.ones(P.ndof))).max() < 1e-12
    p = rng.normal(size=P.ndof)
    assert np.abs(mats.G @ p - assemble_gradp_force(mesh, V, P, p)).max() < 1e-13
    # p = x: (G p)_i = int v_i,x
    px = P.interpolate(lambda x: x[..., 0])
    c = rng.normal(size=V.ndof)
    pts, _, w = physical_rule(mesh, 8)
    vc, _, _ = V.evaluate_ref(c, pts)
    assert abs((mats.G @ px) @ c - np.sum(w * vc[..., 0])) < 1e-12


def test_boundary_data_flux_check():
    mesh = build_unit_square_mesh(2)
    leaky = BoundaryData({"lid": lambda x, t: np.column_stack([np.zeros(len(x)), np.ones(len(x))])})
    assert np.isclose(leaky.net_flux(mesh, 0.0), 1.0)
    with pytest.raises(ValueError):
        leaky.check_zero_flux(mesh)
