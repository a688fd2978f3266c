import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from ppeflow.imex import (
    ImexPair,
    PoleError,
    batched_R,
    imex111,
    imex443,
    load_pair,
    raster_region,
    stability_function,
    stability_function_det,
    wedge_check,
)
from ppeflow.solver import ScalarSystem, imex_advance

F = Fraction


def test_imex443_coefficients():
    p = imex443()
    assert p.s == 4
    assert all(p.A_exact[i][i] == F(1, 2) for i in range(4))
    assert [sum(row) for row in p.A_exact] == [F(1, 2), F(2, 3), F(1, 2), F(1)]
    assert np.allclose(p.c_hat, [0, 0.5, 2 / 3, 0.5, 1.0])
    assert p.b_exact == (F(3, 2), F(-3, 2), F(1, 2), F(1, 2))
    assert p.b_hat_exact == (F(1, 4), F(7, 4), F(3, 4), F(-7, 4), 0)
    assert [p.A_hat_exact[2][0], p.A_hat_exact[2][1]] == [F(11, 18), F(1, 18)]
    assert [p.A_hat_exact[3][0], p.A_hat_exact[3][1], p.A_hat_exact[3][2]] == [F(5, 6), F(-5, 6), F(1, 2)]
    assert sum(p.b_exact) == 1 and sum(p.b_hat_exact) == 1
    assert p.stiffly_accurate


def test_imex111_closed_form(rng):
    p = imex111()
    assert stability_function(p, 0, 0) == 1.0
    assert stability_function(p, 1, 1) == pytest.approx(1.0, abs=1e-15)
    for a, b in rng.uniform(0, 10, (50, 2)):
        assert stability_function(p, a, b) == pytest.approx((1 + b) / (1 + a), rel=1e-14)
        assert stability_function(p, a, 0) == pytest.approx(1 / (1 + a), rel=1e-14)


@pytest.mark.parametrize("pair", [imex443(), imex111()], ids=["imex443", "imex111"])
def test_det_and_solve_forms_agree(pair, rng):
    assert stability_function(pair, 0.0, 0.0) == 1.0
    for a, b in rng.uniform(0, 5, (100, 2)):
        assert abs(stability_function(pair, a, b) - stability_function_det(pair, a, b)) < 1e-12


def test_wedge_property():
    grid = np.geomspace(1e-2, 100, 50)
    A, B = np.meshgrid(grid, grid)
    keep = B <= A
    assert np.all(np.abs(batched_R(imex443(), A[keep], B[keep])) <= 1.0 + 1e-14)
    for pair in (imex443(), imex111()):
        res = wedge_check(pair, 1e4, 200)
        assert res.passed and res.violation is None and res.max_abs_R <= 1 + 1e-12
        assert res.samples == 200 * 201 // 2


def test_broken_pair_fails_wedge():
    p = imex443()
    broken = dataclasses.replace(p, b_hat_exact=tuple(2 * v for v in p.b_hat_exact))
    res = wedge_check(broken, 1e4, 60)
    assert not res.passed
    a, b = res.violation
    assert 0 < b <= a and abs(stability_function(broken, a, b)) > 1 + 1e-12


def test_raster_examples():
    r = raster_region(imex111(), resolution=41)
    assert r.values.shape == (41, 41)
    diag = np.diag(r.values)  # alpha == beta
    assert np.allclose(diag, 1.0, atol=1e-14)
    p = imex443()
    r = raster_region(p, resolution=21)
    At = p.A  # beta = 0 row: DIRK stability 1 - alpha b^T (I + alpha A)^{-1} e
    for a, val in zip(r.alpha, r.values[0]):
        dirk = 1 - a * p.b @ np.linalg.solve(np.eye(4) + a * At, np.ones(4))
        assert abs(val - abs(dirk)) < 1e-13
    below = r.values[np.less.outer(r.beta, r.alpha)]
    assert np.all(below <= 1 + 1e-12)
    with pytest.raises(ValueError):
        raster_region(p, alpha_range=(1.0, 0.0))
    with pytest.raises(ValueError):
        wedge_check(p, -1.0)


def test_scalar_stepper_matches_R(rng):
    pair = imex443()
    for gamma, mu, dt in zip(rng.uniform(0, 50, 100), rng.uniform(-50, 50, 100), rng.uniform(1e-3, 1.0, 100)):
        y, _ = imex_advance(ScalarSystem(gamma, mu), np.array([1.0]), 0.0, dt, pair)
        R = stability_function(pair, gamma * dt, mu * dt)
        assert abs(y[0] - R) < 1e-13 * max(1.0, abs(R))


def test_third_order_local_error():
    pair = imex443()
    lam = -1.3
    dts = 0.4 * 2.0 ** -np.arange(5)
    errs = [abs(imex_advance(ScalarSystem(-lam, 0.0), np.array([1.0]), 0.0, dt, pair)[0][0] - np.exp(lam * dt))
            for dt in dts]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert slopes[-1] >= 3.9


def test_pole_and_validation():
    neg = ImexPair.from_rows("neg", [[-1]], [1], [[], [-1]], [1, 0])
    with pytest.raises(PoleError):
        stability_function(neg, 1.0, 0.0)
    with pytest.raises(PoleError):
        stability_function_det(neg, 1.0, 0.0)
    with pytest.raises(ValueError):
        ImexPair.from_rows("bad", [[1, 1], [0, 1]], [0.5, 0.5], [[], [1], [0, 1]], [0.5, 0.5, 0])
    with pytest.raises(ValueError):
        ImexPair.from_rows("bad", [[1]], [2], [[], [1]], [1, 0])
    with pytest.raises(ValueError):
        ImexPair.from_rows("bad", [[1]], [1], [[], [F(1, 2)]], [1, 0])


def test_load_pair_round_trip(tmp_path):
    path = tmp_path / "pair.txt"
    path.write_text(
        "# the 443 pair\n"
        "A = 1/2; 1/6 1/2; -1/2 1/2 1/2; 3/2 -3/2 1/2 1/2\n"
        "b = 3/2 -3/2 1/2 1/2\n"
        "A_hat = ; 1/2; 11/18 1/18; 5/6 -5/6 1/2; 1/4 7/4 3/4 -7/4\n"
        "b_hat = 1/4, 7/4, 3/4, -7/4, 0\n"
    )
    p = load_pair(str(path))
    q = imex443()
    assert (p.A_exact, p.b_exact, p.A_hat_exact, p.b_hat_exact) == (q.A_exact, q.b_exact, q.A_hat_exact, q.b_hat_exact)
    path.write_text("A = 1\nb = 1\n")
    with pytest.raises(ValueError):
        load_pair(str(path))
    path.write_text("A 1\n")
    with pytest.raises(ValueError):
        load_pair(str(path))
