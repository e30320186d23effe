"""Sparse storage, assembly scatter, and direct/iterative solve kernels.

All step solvers go through :func:`factor_solve` / :class:`DirectFactor` so the
residual contract ``||Ax - b|| <= tol * ||b||`` is enforced in one place.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError


def build_csr(rows, cols, data, shape):
    """Assemble a CSR matrix from COO triplets, summing duplicate entries."""
    a = sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()
    a.sum_duplicates()
    return a


class ScatterPattern:
    """Precomputed duplicate-summing COO -> CSR map for a fixed sparsity pattern.

    Assembly loops produce raw (row, col, value) triplets in a fixed order;
    the pattern maps each raw slot to its CSR data slot so repeated
    assemblies only touch the data array.  Summation order is fixed by the
    raw entry order, which keeps reassembly bit-reproducible.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        order = np.lexsort((cols, rows))
        rs, cs = rows[order], cols[order]
        new_group = np.empty(rs.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
        group = np.cumsum(new_group) - 1
        self.nnz = int(group[-1]) + 1
        self.slot = np.empty(rows.size, dtype=np.int64)
        self.slot[order] = group
        self.indices = cs[new_group].astype(np.int32)
        keep_rows = rs[new_group]
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int32)
        np.add.at(self.indptr, keep_rows + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.shape = shape

    def csr(self, raw_data):
        """Scatter raw COO data into a fresh CSR matrix on this pattern."""
        data = np.zeros(self.nnz)
        np.add.at(data, self.slot, np.asarray(raw_data).ravel())
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


class DirectFactor:
    """Sparse LU factorization with a checked solve.

    The factorization is immutable after construction; concurrent solves
    against one factor are safe.  Symmetric inputs get the symmetric
    fill-reducing ordering.
    """

    def __init__(self, a, symmetric=False):
        a = sp.csc_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise SolverError(f"matrix is not square: {a.shape}")
        self._a = a
        try:
            permc = "MMD_AT_PLUS_A" if symmetric else "COLAMD"
            self._lu = spla.splu(a, permc_spec=permc)
        except RuntimeError as exc:  # SuperLU signals singularity this way
            raise SolverError(f"sparse factorization failed: {exc}") from exc

    def solve(self, b, tol=1e-12):
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        norm_b = np.linalg.norm(b)
        if norm_b == 0.0:
            return np.zeros_like(b)
        resid = np.linalg.norm(self._a @ x - b)
        if resid > tol * norm_b:
            # one step of iterative refinement before giving up
            x = x + self._lu.solve(b - self._a @ x)
            resid = np.linalg.norm(self._a @ x - b)
            if resid > tol * norm_b:
                raise SolverError(
                    f"direct solve residual {resid:.3e} exceeds {tol:.1e} * ||b|| = "
                    f"{tol * norm_b:.3e}",
                    residual=resid,
                )
        if not np.all(np.isfinite(x)):
            raise SolverError("direct solve produced non-finite entries")
        return x


def factor_solve(a, b, tol=1e-12, symmetric=False):
    """Factor ``a`` and solve ``a x = b`` with ``||Ax - b|| <= tol * ||b||``."""
    return DirectFactor(a, symmetric=symmetric).solve(b, tol=tol)


def krylov_solve(a, b, tol=1e-10, maxiter=2000):
    """Optional preconditioned Krylov path for larger systems.

    GMRES with an incomplete-LU preconditioner; same residual contract as
    the direct path, checked explicitly.
    """
    a = sp.csc_matrix(a)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(a.shape[0])
    try:
        ilu = spla.spilu(a, drop_tol=1e-6, fill_factor=20)
    except RuntimeError as exc:
        raise SolverError(f"ILU preconditioner failed: {exc}") from exc
    m = spla.LinearOperator(a.shape, ilu.solve)
    x, info = spla.gmres(a, b, rtol=tol, atol=0.0, maxiter=maxiter, M=m)
    resid = np.linalg.norm(a @ x - b)
    if info != 0 or resid > tol * norm_b:
        raise SolverError(
            f"gmres did not converge (info={info}, residual {resid:.3e})",
            residual=resid,
        )
    return x
