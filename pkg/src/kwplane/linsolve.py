"""SPD linear solves for Newton steps, reusing an old factorization when it still helps."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT_LIMIT = 401 * 401


class SPDSolver:
    """Solve ``A x = b`` for a sequence of nearby SPD matrices.

    The most recent factorization (sparse LU up to :data:`DIRECT_LIMIT`
    unknowns, an algebraic multigrid hierarchy beyond) is used as a
    preconditioner for conjugate gradients on later matrices; it is rebuilt
    when CG needs more than ``max_cg`` iterations.
    """

    def __init__(self, max_cg: int = 25, rtol: float = 1e-13):
        self.max_cg = max_cg
        self.rtol = rtol
        self._precond = None
        self._shape = None
        self.factorizations = 0

    def _factor(self, A: sp.spmatrix):
        self.factorizations += 1
        self._shape = A.shape
        if A.shape[0] <= DIRECT_LIMIT:
            lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
            self._precond = lu.solve
            return lu.solve
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A), symmetry="symmetric")
        M = ml.aspreconditioner(cycle="V")
        self._precond = M.matvec
        return None

    def solve(self, A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
        if self._precond is not None and self._shape == A.shape:
            x = self._cg(A, b)
            if x is not None:
                return x
        direct = self._factor(A)
        if direct is not None:
            return direct(b)
        x = self._cg(A, b, maxiter=500)
        if x is None:
            raise np.linalg.LinAlgError("preconditioned CG did not converge")
        return x

    def _cg(self, A, b, maxiter=None):
        M = spla.LinearOperator(A.shape, matvec=self._precond, dtype=float)
        x, info = spla.cg(A, b, rtol=self.rtol, atol=0.0, maxiter=maxiter or self.max_cg, M=M)
        if info != 0:
            return None
        return x
