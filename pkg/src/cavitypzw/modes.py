"""Transverse cavity modes: divergence-free eigenfields of curl curl.

Modes solve ``C^T C f = omega^2 f`` with ``G^T f = 0`` (c = 1). The solver
works on ``C^T C + shift * G G^T``, whose kernel is exactly the harmonic
space, and discards gradient eigenvectors by their divergence. Because the
two terms commute, each eigenspace splits cleanly into a divergence-free and
a gradient part even when their eigenvalues coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _linalg
from .exceptions import ValidationError
from .geometry import Grid, locate
from .operators import FieldVector, operators_for


@dataclass(frozen=True, eq=False)
class ModeBasis:
    omegas: np.ndarray
    vectors: list
    zero_mode_count: int
    grid: Grid

    def __len__(self):
        return len(self.vectors)

    def as_matrix(self) -> np.ndarray:
        """``(n_dof_edges, n_modes)`` array of mode values."""
        if not self.vectors:
            return np.zeros((self.grid.n_dof_edges, 0))
        return np.column_stack([f.values for f in self.vectors])


def _divfree_part(G_T, V: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of ``span(V) ∩ ker(G^T)`` for an eigenspace ``V``."""
    M = G_T @ V
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    s = np.concatenate([s, np.zeros(V.shape[1] - len(s))])
    keep = s <= tol
    return V @ Vh[keep].T


def transverse_modes(grid: Grid, k: int, shift: float = 1.0, zero_rtol: float = 1e-10,
                     dense_max: int = _linalg.DENSE_EIG_MAX) -> ModeBasis:
    """The ``k`` lowest transverse modes of ``grid``, ascending in frequency.

    Vectors are orthonormal under the ``h^2``-weighted product. Each
    degenerate cluster (including the zero-frequency harmonic block) gets the
    deterministic basis of :func:`cavitypzw._linalg.canonical_basis`.
    """
    ops = operators_for(grid)
    n = grid.n_dof_edges
    n_divfree = n - grid.n_dof_vertices
    if k < 0 or k > n_divfree:
        raise ValidationError(
            f"requested {k} modes but the divergence-free space has dimension {n_divfree}"
        )
    if k == 0:
        return ModeBasis(np.zeros(0), [], 0, grid)
    A = ops.hodge_laplacian(shift)
    zero_tol = zero_rtol * _linalg.gershgorin_bound(A)
    div_tol = 1e-6 * np.sqrt(8.0) / grid.h

    j = min(n, 2 * k + 4)
    while True:
        vals, vecs = _linalg.smallest_eigenpairs(A, j, dense_max=dense_max)
        groups = _linalg.clusters(vals, zero_tol)
        if j < n:
            groups = groups[:-1]  # the top cluster may be cut off
        found, n_found = [], 0
        for g in groups:
            W = _divfree_part(ops.GT, vecs[:, g], div_tol)
            if W.shape[1]:
                mu = 0.0 if vals[g.start] <= zero_tol else float(np.mean(vals[g]))
                found.append((mu, W))
                n_found += W.shape[1]
        if n_found >= k or j == n:
            break
        j = min(n, 2 * j)

    omegas, columns, zero_count = [], [], 0
    for mu, W in found:
        B = _linalg.canonical_basis(W)
        omegas.extend([np.sqrt(mu)] * B.shape[1])
        columns.append(B)
        if mu == 0.0:
            zero_count += B.shape[1]
    F = np.column_stack(columns)[:, :k] / grid.h
    omegas = np.asarray(omegas[:k])
    vectors = [FieldVector(F[:, i], grid) for i in range(F.shape[1])]
    return ModeBasis(omegas, vectors, min(zero_count, k), grid)


def all_transverse_modes(grid: Grid, shift: float = 1.0) -> ModeBasis:
    """Every transverse mode of a small grid (dense eigensolve)."""
    return transverse_modes(grid, grid.n_dof_edges - grid.n_dof_vertices, shift=shift,
                            dense_max=max(grid.n_dof_edges, _linalg.DENSE_EIG_MAX))


def eval_mode_at(basis: ModeBasis, lam: int, point) -> np.ndarray:
    """Mode ``lam`` sampled at the edges nearest ``point`` (no interpolation)."""
    if not 0 <= lam < len(basis):
        raise ValidationError(f"mode index {lam} out of range [0, {len(basis)})")
    loc = locate(basis.grid, point)
    f = basis.vectors[lam].values
    return np.array([f[loc.x_edge], f[loc.y_edge]])


def mode_residuals(basis: ModeBasis) -> dict:
    """Worst relative eigen-residual, divergence and orthonormality defect."""
    ops = operators_for(basis.grid)
    F = basis.as_matrix()
    if F.shape[1] == 0:
        return {"eigen": 0.0, "divergence": 0.0, "orthonormality": 0.0}
    fn = np.linalg.norm(F, axis=0)
    eig = np.linalg.norm(ops.curlcurl @ F - F * basis.omegas ** 2, axis=0) / fn
    div = np.linalg.norm(ops.GT @ F, axis=0) / fn
    gram = basis.grid.h ** 2 * (F.T @ F)
    return {
        "eigen": float(eig.max()),
        "divergence": float(div.max()),
        "orthonormality": float(np.abs(gram - np.eye(F.shape[1])).max()),
    }
