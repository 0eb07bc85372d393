"""Solver plumbing: SPD solves, smallest eigenpairs, canonical subspace bases."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import SolverError

DENSE_SOLVE_MAX = 2000
DENSE_EIG_MAX = 4000
CG_RTOL = 1e-12
EIG_RESIDUAL_RTOL = 1e-10
CLUSTER_RTOL = 1e-9
PIVOT_RTOL = 1e-3


def gershgorin_bound(A) -> float:
    """Upper bound on the spectral radius of a symmetric matrix."""
    if sp.issparse(A):
        return float(abs(A).sum(axis=1).max()) if A.shape[0] else 0.0
    return float(np.abs(A).sum(axis=1).max()) if A.shape[0] else 0.0


class SPDSolver:
    """Solve ``A x = b`` for a sparse SPD matrix.

    Dense Cholesky for small systems, conjugate gradients otherwise.
    """

    def __init__(self, A, rtol: float = CG_RTOL, dense_max: int = DENSE_SOLVE_MAX):
        self.A = sp.csr_matrix(A)
        self.n = self.A.shape[0]
        self.rtol = rtol
        self._chol = None
        if 0 < self.n <= dense_max:
            self._chol = la.cho_factor(self.A.toarray(), lower=True)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if self.n == 0:
            return np.zeros_like(b)
        if self._chol is not None:
            x = la.cho_solve(self._chol, b)
        elif b.ndim == 1:
            x = self._cg(b)
        else:
            x = np.column_stack([self._cg(b[:, k]) for k in range(b.shape[1])])
        self._check(b, x)
        return x

    def _cg(self, b):
        if not np.any(b):
            return np.zeros_like(b)
        x, info = spla.cg(self.A, b, rtol=self.rtol, atol=0.0, maxiter=20 * self.n)
        if info != 0:
            res = np.linalg.norm(self.A @ x - b) / np.linalg.norm(b)
            raise SolverError("conjugate gradients did not converge", res)
        return x

    def _check(self, b, x):
        bn = np.linalg.norm(b, axis=0)
        rn = np.linalg.norm(self.A @ x - b, axis=0)
        rel = np.max(np.where(bn > 0, rn / np.where(bn > 0, bn, 1.0), rn))
        # CG stops at rtol in the preconditioned norm; allow headroom for that
        if rel > max(100 * self.rtol, 1e-10):
            raise SolverError("Poisson solve residual above tolerance", float(rel))


def smallest_eigenpairs(A, k: int, dense_max: int = DENSE_EIG_MAX,
                        sigma: float = -1.0, rtol: float = EIG_RESIDUAL_RTOL):
    """The ``k`` smallest eigenpairs of a symmetric positive semidefinite matrix.

    Returns ascending eigenvalues and 2-norm-orthonormal eigenvectors.
    Dense LAPACK up to ``dense_max`` rows, shift-invert Lanczos (ARPACK)
    about the negative shift ``sigma`` above that.
    """
    n = A.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.zeros(0), np.zeros((n, 0))
    if n <= dense_max or k >= n - 1:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        vals, vecs = la.eigh(M, subset_by_index=[0, k - 1])
    else:
        v0 = np.cos(np.arange(n) * 0.7 + 0.3)
        try:
            vals, vecs = spla.eigsh(sp.csc_matrix(A), k=k, sigma=sigma, which="LM",
                                    v0=v0, maxiter=max(50 * k, 100))
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"Lanczos did not converge for {k} eigenpairs") from exc
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
    scale = gershgorin_bound(A)
    worst = float(res.max()) if res.size else 0.0
    if worst > rtol * max(scale, 1.0):
        raise SolverError("eigenpair residual above tolerance", worst)
    return vals, vecs


def clusters(vals: np.ndarray, zero_tol: float, rtol: float = CLUSTER_RTOL):
    """Split ascending ``vals`` into runs of (numerically) equal eigenvalues.

    Values at or below ``zero_tol`` form one block.
    """
    out = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i < len(vals):
            a, b = vals[i - 1], vals[i]
            if a <= zero_tol and b <= zero_tol:
                continue
            if a > zero_tol and (b - a) <= rtol * max(abs(b), 1e-300):
                continue
        out.append(slice(start, i))
        start = i
    return out


def canonical_basis(W: np.ndarray, pivot_rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Deterministic orthonormal basis of ``span(W)``.

    ``W`` has orthonormal columns. Rows (DOFs) are scanned in order and the
    projector's column at each row is Gram-Schmidt orthonormalized when its
    residual is significant. The component at each pivot DOF is positive,
    so each vector's first significant component is positive.
    """
    n, m = W.shape
    if m == 0:
        return W.copy()
    rownorm = np.linalg.norm(W, axis=1)
    thresh = pivot_rtol * rownorm.max()
    coeffs = []
    for i in np.flatnonzero(rownorm > thresh):
        r = W[i].copy()
        for c in coeffs:
            r -= (c @ r) * c
        for c in coeffs:
            r -= (c @ r) * c
        nr = np.linalg.norm(r)
        if nr > thresh:
            coeffs.append(r / nr)
            if len(coeffs) == m:
                break
    if len(coeffs) < m:
        raise SolverError("could not build a canonical basis for a degenerate cluster")
    return W @ np.column_stack(coeffs)


def principal_angles(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    if U.shape[1] == 0 and V.shape[1] == 0:
        return np.zeros(0)
    return la.subspace_angles(U, V)
