"""Orthogonal split of edge fields into gradients and divergence-free parts.

``Q v = G (G^T G)^{-1} G^T v`` projects onto gradients of potentials that
vanish on the conductor; ``R = 1 - Q`` projects onto divergence-free fields,
which include the harmonic (cohomological) fields of multiply connected
domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _linalg
from .exceptions import ValidationError
from .geometry import Grid
from .operators import FieldVector, inner, operators_for


@dataclass(frozen=True, eq=False)
class HodgeSplit:
    gradient_part: FieldVector
    divfree_part: FieldVector
    potential: np.ndarray


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    vectors: list
    eigenvalues: np.ndarray
    n_dof_edges: int

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def as_matrix(self) -> np.ndarray:
        """``(n_dof_edges, dimension)`` array; columns are the basis vectors."""
        if not self.vectors:
            return np.zeros((self.n_dof_edges, 0))
        return np.column_stack([v.values for v in self.vectors])


def poisson_solver(grid: Grid, rtol: float = _linalg.CG_RTOL) -> _linalg.SPDSolver:
    """Cached solver for the Dirichlet Laplacian ``G^T G`` of ``grid``."""
    key = ("poisson", rtol)
    solver = grid._cache.get(key)
    if solver is None:
        solver = grid._cache[key] = _linalg.SPDSolver(operators_for(grid).laplacian, rtol)
    return solver


def poisson_dirichlet(grid: Grid, rho, eps0: float = 1.0,
                      rtol: float = _linalg.CG_RTOL) -> np.ndarray:
    """Potential ``U`` with ``eps0 * div grad U = -rho`` and ``U = 0`` on the conductor.

    ``rho`` is a charge density on the DOF vertices (1-D, or 2-D with one
    column per right-hand side). Discretely ``G^T G U = rho / eps0``.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape[0] != grid.n_dof_vertices:
        raise ValidationError(
            f"charge density has {rho.shape[0]} entries, grid has "
            f"{grid.n_dof_vertices} interior vertices"
        )
    if not np.all(np.isfinite(rho)):
        raise ValidationError("charge density must be finite")
    return poisson_solver(grid, rtol).solve(rho / eps0)


def project_q_values(grid: Grid, V: np.ndarray, rtol: float = _linalg.CG_RTOL):
    """Gradient parts and potentials of raw DOF arrays.

    ``V`` has shape ``(n_dof_edges,)`` or ``(n_dof_edges, m)``.
    """
    ops = operators_for(grid)
    U = poisson_solver(grid, rtol).solve(ops.GT @ V)
    return ops.G @ U, U


def project_Q(v: FieldVector, rtol: float = _linalg.CG_RTOL) -> HodgeSplit:
    """Split ``v`` into ``Q v = G U`` and ``R v = v - Q v``."""
    q, U = project_q_values(v.grid, v.values, rtol)
    return HodgeSplit(FieldVector(q, v.grid), FieldVector(v.values - q, v.grid), U)


def project_R(v: FieldVector, rtol: float = _linalg.CG_RTOL) -> FieldVector:
    return project_Q(v, rtol).divfree_part


def harmonic_basis(grid: Grid, zero_rtol: float = 1e-10,
                   dense_max: int = _linalg.DENSE_EIG_MAX) -> HarmonicBasis:
    """Orthonormal basis of the kernel of ``C^T C + G G^T``.

    Eigenvalues at most ``zero_rtol`` times the Gershgorin bound of the
    Laplacian count as zero.
    """
    L1 = operators_for(grid).hodge_laplacian(1.0)
    n = L1.shape[0]
    if n == 0:
        return HarmonicBasis([], np.zeros(0), 0)
    zero_tol = zero_rtol * _linalg.gershgorin_bound(L1)
    k = min(n, 8)
    while True:
        vals, vecs = _linalg.smallest_eigenpairs(L1, k, dense_max=dense_max)
        nzero = int(np.count_nonzero(vals <= zero_tol))
        if nzero < k or k == n:
            break
        k = min(n, 2 * k)
    W = _linalg.canonical_basis(vecs[:, :nzero])
    W /= grid.h  # unit norm under the h^2-weighted product
    return HarmonicBasis([FieldVector(W[:, i], grid) for i in range(nzero)],
                         vals[:nzero], n)


def hodge_report(v: FieldVector, split: HodgeSplit | None = None) -> dict:
    """Diagnostics of a split: orthogonality, completeness and divergence."""
    split = split or project_Q(v)
    vv = inner(v, v)
    ops = operators_for(v.grid)
    recon = split.gradient_part.values + split.divfree_part.values - v.values
    return {
        "dim_harmonic": harmonic_basis(v.grid).dimension,
        "orthogonality_residual": abs(inner(split.gradient_part, split.divfree_part))
        / vv if vv > 0 else 0.0,
        "completeness_residual": float(np.linalg.norm(recon) / max(np.linalg.norm(v.values), 1e-300)),
        "divergence_residual": float(np.abs(ops.GT @ split.divfree_part.values).max(initial=0.0)),
    }

