import numpy as np
import pytest
import scipy.sparse as sp

from ppeflow.linalg import SingularMatrixError, SolverError, factorize, relative_residual, solve


def test_identity_and_permutation():
    F = factorize(sp.identity(5))
    b = np.arange(5.0)
    assert np.array_equal(solve(F, b), b)
    P = factorize(sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]]))  # needs pivoting
    assert np.allclose(solve(P, np.array([1.0, 2.0])), [2.0, 1.0], atol=1e-15)


def test_diagonal_and_zero_rhs():
    F = factorize(2.0 * sp.identity(4))
    assert np.allclose(F.solve(np.ones(4)), 0.5)
    x = F.solve(np.zeros(4))
    assert np.array_equal(x, np.zeros(4))


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_random_spd(rng, method):
    B = rng.normal(size=(50, 50))
    A = sp.csr_matrix(B.T @ B + np.eye(50))
    b = rng.normal(size=50)
    x = factorize(A, method=method).solve(b)
    limit = 1e-12 if method == "direct" else 1e-10
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < limit


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_saddle_point(rng, method):
    n, m = 30, 10
    B = sp.csr_matrix(rng.normal(size=(m, n)))
    A = sp.bmat([[sp.identity(n), B.T], [B, None]], format="csr")
    b = rng.normal(size=n + m)
    F = factorize(A, method=method)
    assert F.symmetric
    assert relative_residual(A, F.solve(b), b) < 1e-10


def test_nonsymmetric_iterative(rng):
    A = sp.csr_matrix(np.eye(20) * 4 + np.triu(rng.normal(size=(20, 20)), 1))
    b = rng.normal(size=20)
    F = factorize(A, method="iterative")
    assert not F.symmetric
    assert relative_residual(A, F.solve(b), b) < 1e-10


def test_errors():
    with pytest.raises(SingularMatrixError):
        factorize(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularMatrixError):
        factorize(sp.csr_matrix((3, 3)))
    with pytest.raises(ValueError):
        factorize(sp.csr_matrix(np.ones((2, 3))))
    with pytest.raises(ValueError):
        factorize(sp.csr_matrix([[np.nan]]))
    with pytest.raises(ValueError):
        factorize(sp.identity(3), method="cg")
    with pytest.raises(ValueError):
        factorize(sp.identity(3)).solve(np.ones(4))
    singular = sp.csr_matrix([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SolverError):
        factorize(singular, method="iterative").solve(np.array([1.0, 1.0]))


def test_duplicates_summed_and_deterministic(rng):
    A = sp.coo_matrix(([1.0, 1.0, 3.0], ([0, 0, 1], [0, 0, 1])), shape=(2, 2))
    F = factorize(A)
    assert F.A.nnz == 2 and F.A[0, 0] == 2.0
    M = sp.random(40, 40, density=0.2, random_state=3) + 5 * sp.identity(40)
    b = rng.normal(size=40)
    assert np.array_equal(factorize(M).solve(b), factorize(M).solve(b))
