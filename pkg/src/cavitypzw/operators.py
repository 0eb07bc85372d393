"""Mimetic grad, curl and div on the staggered grid, plus the h^2 inner product.

All operators act on DOF coordinates only: values on eliminated boundary
edges and vertices are the known zeros and never appear as columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ValidationError
from .geometry import Grid


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Sparse matrix stored as (row, col)-sorted, duplicate-free triplets."""

    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def from_triplets(cls, nrows, ncols, rows, cols, values) -> "SparseOperator":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if len(rows) > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                raise ValueError("duplicate triplets in sparse operator")
        for a in (rows, cols, values):
            a.setflags(write=False)
        return cls(int(nrows), int(ncols), rows, cols, values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def T(self) -> "SparseOperator":
        return SparseOperator.from_triplets(self.ncols, self.nrows, self.cols,
                                            self.rows, self.values)

    def __neg__(self) -> "SparseOperator":
        return SparseOperator(self.nrows, self.ncols, self.rows, self.cols, -self.values)

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=self.shape)

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.values
        return out

    def __matmul__(self, other):
        return self.tocsr() @ other

    def same_triplets(self, other: "SparseOperator") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.values, other.values))

    def dump(self, path) -> None:
        """Write ``row col value`` lines, sorted, values in round-trip precision."""
        with open(path, "w") as fh:
            fh.write(f"# {self.nrows} {self.ncols} {len(self.values)}\n")
            for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
                fh.write(f"{r} {c} {v!r}\n")

    @classmethod
    def load(cls, path) -> "SparseOperator":
        with open(path) as fh:
            header = fh.readline().split()
            nrows, ncols = int(header[1]), int(header[2])
            data = np.loadtxt(fh, ndmin=2) if int(header[3]) else np.zeros((0, 3))
        return cls.from_triplets(nrows, ncols, data[:, 0], data[:, 1], data[:, 2])


@dataclass(frozen=True, eq=False)
class FieldVector:
    """Edge-midpoint samples of an in-plane field, x-edge block then y-edge block."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_dof_edges,):
            raise ValidationError(
                f"field has shape {values.shape}, grid expects ({self.grid.n_dof_edges},)"
            )
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.values[: self.grid.n_dof_xedges]

    @property
    def y(self) -> np.ndarray:
        return self.values[self.grid.n_dof_xedges:]

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self)))

    def __add__(self, other: "FieldVector") -> "FieldVector":
        _check_same_grid(self, other)
        return FieldVector(self.values + other.values, self.grid)

    def __sub__(self, other: "FieldVector") -> "FieldVector":
        _check_same_grid(self, other)
        return FieldVector(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> "FieldVector":
        return FieldVector(self.values * scalar, self.grid)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid) -> "FieldVector":
        return cls(np.zeros(grid.n_dof_edges), grid)

    @classmethod
    def sample(cls, grid: Grid, func) -> "FieldVector":
        """Sample ``func(x, y) -> (vx, vy)`` at DOF edge midpoints."""
        xy = grid.edge_midpoints()
        vx, vy = func(xy[:, 0], xy[:, 1])
        isx = grid.is_xedge_dof()
        vals = np.where(isx, np.broadcast_to(vx, isx.shape), np.broadcast_to(vy, isx.shape))
        return cls(vals.astype(np.float64), grid)


def _check_same_grid(u: FieldVector, v: FieldVector) -> None:
    if u.grid is not v.grid and not u.grid.same_tables(v.grid):
        raise ValidationError("fields live on different grids")
    if u.grid.h != v.grid.h:
        raise ValidationError("fields live on grids with different spacing")


def inner(u: FieldVector, v: FieldVector) -> float:
    """Discrete L2 product ``h^2 sum_e u_e v_e``."""
    _check_same_grid(u, v)
    return float(u.grid.h ** 2 * np.dot(u.values, v.values))


def inner_scalar(grid: Grid, u, w) -> float:
    """Discrete L2 product of vertex functions on the DOF vertices."""
    return float(grid.h ** 2 * np.dot(np.asarray(u), np.asarray(w)))


def build_grad0(grid: Grid) -> SparseOperator:
    """Gradient of vertex potentials vanishing on the conductor.

    ``(G u)_e = (u_head - u_tail) / h`` for every DOF edge.
    """
    h = grid.h
    e = grid.dof_edges
    rows, cols, vals = [], [], []
    for end, sign in ((grid.edge_tail[e], -1.0), (grid.edge_head[e], 1.0)):
        col = grid.vertex_dof[end]
        keep = col >= 0
        rows.append(np.flatnonzero(keep))
        cols.append(col[keep])
        vals.append(np.full(np.count_nonzero(keep), sign / h))
    return SparseOperator.from_triplets(
        grid.n_dof_edges, grid.n_dof_vertices,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
    )


def build_curl(grid: Grid) -> SparseOperator:
    """Counter-clockwise circulation per inside face, divided by h."""
    h = grid.h
    nx, nxe = grid.nx, grid.n_xedges
    f = grid.faces
    i, j = f % nx, f // nx
    bottom = j * nx + i
    top = (j + 1) * nx + i
    left = nxe + j * (nx + 1) + i
    right = left + 1
    rows, cols, vals = [], [], []
    for edges, sign in ((bottom, 1.0), (right, 1.0), (top, -1.0), (left, -1.0)):
        col = grid.edge_dof[edges]
        keep = col >= 0
        rows.append(np.flatnonzero(keep))
        cols.append(col[keep])
        vals.append(np.full(np.count_nonzero(keep), sign / h))
    return SparseOperator.from_triplets(
        grid.nF, grid.n_dof_edges,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
    )


def build_div0(grid: Grid) -> SparseOperator:
    """Divergence as the negative adjoint of :func:`build_grad0`."""
    return -build_grad0(grid).T


class Operators:
    """Assembled operators of one grid, in CSR form, cached on the grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.grad0 = build_grad0(grid)
        self.curl = build_curl(grid)
        self.G = self.grad0.tocsr()
        self.C = self.curl.tocsr()
        self.GT = self.G.T.tocsr()
        self.laplacian = (self.GT @ self.G).tocsc()
        self.curlcurl = (self.C.T @ self.C).tocsr()

    def hodge_laplacian(self, shift: float = 1.0) -> sp.csr_matrix:
        """``C^T C + shift * G G^T`` on the DOF edges."""
        return (self.curlcurl + shift * (self.G @ self.GT)).tocsr()


def operators_for(grid: Grid) -> Operators:
    ops = grid._cache.get("operators")
    if ops is None:
        ops = grid._cache["operators"] = Operators(grid)
    return ops
