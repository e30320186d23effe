import numpy as np
import pytest
import scipy.sparse as sp

from wallflow.errors import SolverError
from wallflow.sparsela import (DirectFactor, ScatterPattern, build_csr,
                               factor_solve, krylov_solve)


def test_identity_solve_returns_rhs():
    a = sp.eye(7, format="csc")
    b = np.arange(7.0)
    assert np.array_equal(factor_solve(a, b), b)


def test_spd_solve_matches_dense_inverse():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 5))
    a_dense = m @ m.T + 5.0 * np.eye(5)
    b = rng.standard_normal(5)
    x = factor_solve(sp.csc_matrix(a_dense), b, symmetric=True)
    ref = np.linalg.inv(a_dense) @ b
    assert np.abs(x - ref).max() <= 1e-12 * np.abs(ref).max()


def test_singular_matrix_raises_not_garbage():
    a = sp.csc_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SolverError):
        factor_solve(a, np.array([1.0, 1.0]))


def test_nonsquare_rejected():
    a = sp.csc_matrix(np.ones((3, 2)))
    with pytest.raises(SolverError, match="square"):
        DirectFactor(a)


def test_residual_contract_enforced():
    rng = np.random.default_rng(1)
    a = sp.random(40, 40, density=0.2, random_state=2, format="csc")
    a = a + sp.eye(40) * 10.0
    b = rng.standard_normal(40)
    x = factor_solve(a, b, tol=1e-12)
    assert np.linalg.norm(a @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_zero_rhs_returns_zero():
    a = sp.eye(4, format="csc") * 3.0
    assert np.all(factor_solve(a, np.zeros(4)) == 0.0)


def test_build_csr_sums_duplicates():
    a = build_csr([0, 0, 1], [0, 0, 1], [1.0, 2.0, 5.0], (2, 2))
    assert a[0, 0] == 3.0 and a[1, 1] == 5.0 and a.nnz == 2


def test_scatter_pattern_matches_coo():
    rng = np.random.default_rng(3)
    rows = rng.integers(0, 6, size=40)
    cols = rng.integers(0, 5, size=40)
    vals = rng.standard_normal(40)
    pattern = ScatterPattern(rows, cols, (6, 5))
    ours = pattern.csr(vals).toarray()
    ref = sp.coo_matrix((vals, (rows, cols)), shape=(6, 5)).toarray()
    assert np.abs(ours - ref).max() <= 1e-15
    # second scatter on the same pattern is independent of the first
    vals2 = rng.standard_normal(40)
    ref2 = sp.coo_matrix((vals2, (rows, cols)), shape=(6, 5)).toarray()
    assert np.abs(pattern.csr(vals2).toarray() - ref2).max() <= 1e-15


def test_krylov_path_agrees_with_direct():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((30, 30))
    a = sp.csc_matrix(m @ m.T + 30.0 * np.eye(30))
    b = rng.standard_normal(30)
    x_direct = factor_solve(a, b)
    x_krylov = krylov_solve(a, b, tol=1e-12)
    assert np.abs(x_direct - x_krylov).max() <= 1e-9 * np.abs(x_direct).max()
