import io
import math

import numpy as np
import pytest

from ppeflow.solver import Discretization, FieldState
from ppeflow.verify.cases import CASES, fd_check, get_case
from ppeflow.verify.convergence import ConvergenceTable, convergence_study, rates
from ppeflow.verify.errors import QUANTITIES, ErrorRecord, compute_errors, l2_norm_of
from ppeflow.mesh import build_unit_square_mesh


def random_points(rng, k=100):
    return rng.uniform(0, 1, (k, 2)), rng.uniform(0, 1, k)


@pytest.mark.parametrize("name", sorted(CASES))
def test_forcing_matches_finite_differences(name, rng):
    pts, ts = random_points(rng)
    worst = fd_check(get_case(name), pts, ts, h=1e-4)
    assert set(worst) >= {"u", "grad_u", "u_t", "laplacian_u", "grad_p", "sigma", "curl_sigma", "f"}
    assert max(worst.values()) < 1e-6, worst


@pytest.mark.parametrize("name", sorted(CASES))
def test_divergence_free(name, rng):
    pts, ts = random_points(rng)
    case = get_case(name)
    assert np.abs(case.div_u(pts, ts[0])).max() < 1e-12 * max(1.0, np.abs(case.grad_u(pts, ts[0])).max())


def test_vhe_vanishes_on_walls(rng):
    case = get_case("vhe")
    x = rng.uniform(0, 1, 50)
    inner = np.column_stack([x, rng.uniform(0.2, 0.8, 50)])
    su, sg = np.abs(case.u(inner, 0.7)).max(), np.abs(case.grad_u(inner, 0.7)).max()
    for y in (0.0, 1.0):
        pts = np.column_stack([x, np.full_like(x, y)])
        assert np.abs(case.u(pts, 0.7)).max() < 1e-12 * su
        assert np.abs(case.grad_u(pts, 0.7)).max() < 1e-12 * sg
    assert not case.ppe_enabled and case.periodic_x


def test_full_square_fields_vanish_on_boundary(rng):
    case = get_case("full-square")
    s = rng.uniform(0, 1, 40)
    edges = [np.column_stack([s, 0 * s]), np.column_stack([s, 0 * s + 1]),
             np.column_stack([0 * s, s]), np.column_stack([0 * s + 1, s])]
    inner = rng.uniform(0.2, 0.8, (40, 2))
    su, sf = np.abs(case.u(inner, 0.4)).max(), np.abs(case.f(inner, 0.4)).max()
    for pts in edges:
        assert np.abs(case.u(pts, 0.4)).max() < 1e-12 * su
        assert np.abs(case.f(pts, 0.4)).max() < 1e-12 * sf


def test_temporal_case_is_oscillatory():
    case = get_case("stokes-temporal")
    mesh = build_unit_square_mesh(8, periodic_x=True)
    t = 0.3
    nu = math.sqrt(sum(l2_norm_of(mesh, lambda x: case.u(x, t)[..., a]) ** 2 for a in range(2)))
    nut = math.sqrt(sum(l2_norm_of(mesh, lambda x: case.u_t(x, t)[..., a]) ** 2 for a in range(2)))
    # u_t / u = -200 tan(200 t) pointwise; compare with the closed form
    assert nut / nu == pytest.approx(200 * abs(math.tan(200 * t)), rel=1e-10)
    ratios = [abs(math.tan(200 * s)) for s in np.linspace(0, 0.5, 2001)]
    assert 0.5 < np.median(ratios) < 2.0  # typical ratio is O(200)


def test_known_norm():
    mesh = build_unit_square_mesh(4)
    val = l2_norm_of(mesh, lambda x: np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1]), degree=12)
    assert abs(val - 0.5) < 1e-10


class PolynomialCase:
    """Exact fields inside the discrete spaces for r = 2."""

    def u(self, x, t=0.0):
        return np.stack([1 + x[..., 0], 2 - x[..., 1]], axis=-1)

    def div_u(self, x, t=0.0):
        return 0 * x[..., 0]

    def grad_u(self, x, t=0.0):
        g = np.zeros(x.shape + (2,))
        g[..., 0, 0], g[..., 1, 1] = 1, -1
        return g

    def sigma(self, x, t=0.0):
        return x[..., 0] * x[..., 1]

    def curl_sigma(self, x, t=0.0):
        return np.stack([x[..., 0], -x[..., 1]], axis=-1)

    def pressure(self, x, t=0.0):
        return x[..., 0] ** 2 - x[..., 1]

    def grad_p(self, x, t=0.0):
        return np.stack([2 * x[..., 0], -np.ones_like(x[..., 1])], axis=-1)


def test_errors_vanish_for_exact_interpolant():
    from ppeflow.solver import ProblemSpec

    mesh = build_unit_square_mesh(3)
    disc = Discretization(mesh, 2, ProblemSpec(ppe_enabled=False))
    case = PolynomialCase()
    S, V, P = disc.spaces
    st = FieldState(S.interpolate(case.sigma), V.interpolate(case.u), P.interpolate(case.pressure) + 5.0, 0.0)
    rec = compute_errors(st, case, disc)
    assert set(rec.l2) == set(QUANTITIES)
    assert max(rec.l2.values()) < 1e-12 and max(rec.linf.values()) < 1e-11  # p offset removed by the mean


def test_rates():
    assert rates([1.28e-1, 1.56e-2])[1] == pytest.approx(3.04, abs=0.005)
    e = np.array([3.0, 0.4, 0.05, 0.007])
    assert np.allclose(rates(e)[1:], rates(1e-7 * e)[1:])
    r = rates([1.0, 0.0, np.nan])
    assert all(math.isnan(v) for v in r)


def test_csv_and_partial_table():
    t = ConvergenceTable("x", 1, "spatial")
    for k, e in enumerate([1.0, 0.25]):
        t.records.append(ErrorRecord(2.0**-k, 0.1, {q: e for q in QUANTITIES}, {q: e for q in QUANTITIES}))
    buf = io.StringIO()
    t.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",")[:4] == ["dx", "dt", "u", "u_rate"]
    assert len(lines[0].split(",")) == 2 + 2 * len(QUANTITIES)
    row = lines[2].split(",")
    assert row[2] == "2.50000e-01" and row[3] == "2.00000e+00"
    assert lines[1].split(",")[3] == "nan"


def test_study_rejects_bad_levels_and_reports_failures():
    case = get_case("vhe")
    with pytest.raises(ValueError):
        convergence_study(case, 1, levels=[4, 4])
    with pytest.raises(ValueError):
        convergence_study(case, 1, levels=[4], mode="sideways")
    bad = get_case("vhe")
    bad.T = 2e-3
    orig_f = bad.f

    def f(x, t):  # fail on the second level only
        out = orig_f(x, t)
        return out * np.nan if x.shape[0] > 1000 else out

    bad.f = f
    table = convergence_study(bad, 1, levels=[2, 8])
    assert len(table.records) == 1 and len(table.failures) == 1


def test_small_spatial_study_vhe():
    table = convergence_study(get_case("vhe"), 1, levels=[4, 8])
    assert len(table.records) == 2 and not table.failures
    assert table.errors("u")[1] < table.errors("u")[0]
    assert math.isnan(table.rates("u")[0])
