"""Rectilinear 2D cavity domains with rectangular holes on a staggered grid.

Index conventions
-----------------
The bounding box holds ``nx * ny`` square cells of side ``h``.

* vertex ``(i, j)``, ``0 <= i <= nx``, ``0 <= j <= ny`` -> ``j * (nx + 1) + i``
* x-edge ``(i, j)`` joins vertex ``(i, j)`` to ``(i + 1, j)`` -> ``j * nx + i``
* y-edge ``(i, j)`` joins vertex ``(i, j)`` to ``(i, j + 1)`` ->
  ``nx * (ny + 1) + j * (nx + 1) + i``
* face ``(i, j)`` is the cell ``[i h, (i+1) h] x [j h, (j+1) h]`` -> ``j * nx + i``

x-edges point in +x, y-edges in +y. Degrees of freedom are the interior
edges (both adjacent cells inside the domain) and interior vertices (all four
adjacent cells inside); everything lying on the conductor is eliminated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import PlacementError, ValidationError

_ALIGN_RTOL = 1e-9


def _as_int(value: float, what: str) -> int:
    n = round(value)
    if abs(value - n) > _ALIGN_RTOL * max(1.0, abs(value)):
        raise ValidationError(f"{what} is not a whole number of grid cells ({value!r})")
    return int(n)


@dataclass(frozen=True)
class DomainSpec:
    """Bounding box ``[0, width] x [0, height]`` minus axis-aligned holes.

    Each hole is ``(x0, y0, w, h_rect)`` with its lower-left corner at
    ``(x0, y0)``. All lengths must be multiples of the spacing ``h``.
    """

    width: float
    height: float
    h: float
    holes: tuple[tuple[float, float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "holes", tuple(tuple(float(c) for c in hole) for hole in self.holes)
        )

    @property
    def shape(self) -> tuple[int, int]:
        """Cell counts ``(nx, ny)`` of the bounding box."""
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValidationError(f"grid spacing must be positive, got {self.h!r}")
        nx = _as_int(self.width / self.h, "width / spacing")
        ny = _as_int(self.height / self.h, "height / spacing")
        if nx < 1 or ny < 1:
            raise ValidationError("domain must contain at least one cell")
        return nx, ny

    def hole_cells(self) -> list[tuple[int, int, int, int]]:
        """Validated holes as cell ranges ``(i0, j0, i1, j1)``, end-exclusive."""
        nx, ny = self.shape
        out = []
        for k, hole in enumerate(self.holes):
            if len(hole) != 4:
                raise ValidationError(f"hole {k} must have 4 numbers, got {len(hole)}")
            try:
                i0, j0, wi, hj = (
                    _as_int(c / self.h, f"hole {k} coordinate") for c in hole
                )
            except ValidationError as exc:
                raise ValidationError(f"hole {k} is not grid-aligned: {exc}") from None
            if wi < 1 or hj < 1:
                raise ValidationError(f"hole {k} has non-positive extent")
            if i0 < 1 or j0 < 1 or i0 + wi > nx - 1 or j0 + hj > ny - 1:
                raise ValidationError(
                    f"hole {k} touches or crosses the outer boundary"
                )
            out.append((i0, j0, i0 + wi, j0 + hj))
        for a in range(len(out)):
            for b in range(a + 1, len(out)):
                ai0, aj0, ai1, aj1 = out[a]
                bi0, bj0, bi1, bj1 = out[b]
                gap_x = max(bi0 - ai1, ai0 - bi1)
                gap_y = max(bj0 - aj1, aj0 - bj1)
                if gap_x < 1 and gap_y < 1:
                    raise ValidationError(
                        f"holes {a} and {b} overlap or are less than one cell apart"
                    )
        return out

    def refined(self, factor: int = 2) -> "DomainSpec":
        return DomainSpec(self.width, self.height, self.h / factor, self.holes)

    # JSON document: {"width", "height", "spacing", "holes": [[x0, y0, w, h], ...]}
    @classmethod
    def from_dict(cls, doc: dict) -> "DomainSpec":
        if not isinstance(doc, dict):
            raise ValidationError("domain document must be a JSON object")
        allowed = {"width", "height", "spacing", "holes"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValidationError(f"unknown domain keys: {sorted(unknown)}")
        missing = {"width", "height", "spacing"} - set(doc)
        if missing:
            raise ValidationError(f"missing domain keys: {sorted(missing)}")
        try:
            holes = tuple(tuple(float(c) for c in hole) for hole in doc.get("holes", []))
            spec = cls(float(doc["width"]), float(doc["height"]), float(doc["spacing"]), holes)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed domain document: {exc}") from None
        spec.hole_cells()
        return spec

    @classmethod
    def from_json(cls, path) -> "DomainSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "spacing": self.h,
            "holes": [list(hole) for hole in self.holes],
        }


class Location(NamedTuple):
    """DOF positions (into a field vector) of the edges nearest to a point."""

    x_edge: int
    y_edge: int


@dataclass(frozen=True, eq=False)
class Grid:
    """Staggered-grid cell complex of a :class:`DomainSpec`.

    Attributes ending in ``_dof`` map global indices to DOF positions, with
    ``-1`` for eliminated (boundary or outside) entities.
    """

    spec: DomainSpec
    nx: int
    ny: int
    cells: np.ndarray  # (ny, nx) inside mask
    faces: np.ndarray  # global indices of inside faces
    dof_vertices: np.ndarray
    dof_edges: np.ndarray
    vertex_dof: np.ndarray
    edge_dof: np.ndarray
    edge_tail: np.ndarray
    edge_head: np.ndarray
    edge_inside_faces: np.ndarray  # number of inside faces adjacent to each edge
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def nV(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_xedges(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def nE(self) -> int:
        return self.n_xedges + (self.nx + 1) * self.ny

    @property
    def nF(self) -> int:
        """Number of inside faces."""
        return len(self.faces)

    @property
    def n_holes(self) -> int:
        return len(self.spec.holes)

    @property
    def n_dof_edges(self) -> int:
        return len(self.dof_edges)

    @property
    def n_dof_vertices(self) -> int:
        return len(self.dof_vertices)

    @property
    def n_dof_xedges(self) -> int:
        return int(np.count_nonzero(self.dof_edges < self.n_xedges))

    def vertex_xy(self, v) -> np.ndarray:
        v = np.asarray(v)
        i, j = v % (self.nx + 1), v // (self.nx + 1)
        return np.stack([i * self.h, j * self.h], axis=-1)

    def edge_midpoints(self, edges=None) -> np.ndarray:
        """Midpoint coordinates of global edges (default: the DOF edges)."""
        e = self.dof_edges if edges is None else np.asarray(edges)
        nxe = self.n_xedges
        isx = e < nxe
        ex = np.where(isx, e, 0)
        ey = np.where(isx, 0, e - nxe)
        x = np.where(isx, (ex % self.nx) + 0.5, ey % (self.nx + 1))
        y = np.where(isx, ex // self.nx, (ey // (self.nx + 1)) + 0.5)
        return np.stack([x * self.h, y * self.h], axis=-1)

    def is_xedge_dof(self) -> np.ndarray:
        """Boolean mask over DOF edges: True for x-edges."""
        return self.dof_edges < self.n_xedges

    def euler_characteristic(self) -> int:
        """``V - E + F`` of the closed complex spanned by the inside cells."""
        n_edges = int(np.count_nonzero(self.edge_inside_faces > 0))
        touched = np.zeros(self.nV, dtype=bool)
        touched[self.edge_tail[self.edge_inside_faces > 0]] = True
        touched[self.edge_head[self.edge_inside_faces > 0]] = True
        return int(np.count_nonzero(touched)) - n_edges + self.nF

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_inside_faces == 1)

    def boundary_components(self) -> int:
        """Number of connected boundary curves (outer wall plus one per hole)."""
        be = self.boundary_edges()
        adj = coo_matrix(
            (np.ones(len(be)), (self.edge_tail[be], self.edge_head[be])),
            shape=(self.nV, self.nV),
        )
        _, labels = connected_components(adj, directed=False)
        on_boundary = np.zeros(self.nV, dtype=bool)
        on_boundary[self.edge_tail[be]] = True
        on_boundary[self.edge_head[be]] = True
        return len(np.unique(labels[on_boundary]))

    def boundary_distance(self, point) -> float:
        """Euclidean distance from ``point`` to the conductor.

        Negative when the point lies outside the domain or inside a hole.
        """
        x, y = (float(c) for c in point)
        W, H = self.nx * self.h, self.ny * self.h
        d = min(x, W - x, y, H - y)
        if d <= 0:
            return d
        for x0, y0, w, hh in self.spec.holes:
            dx = max(x0 - x, 0.0, x - (x0 + w))
            dy = max(y0 - y, 0.0, y - (y0 + hh))
            if dx == 0.0 and dy == 0.0:
                return -1.0
            d = min(d, math.hypot(dx, dy))
        return d

    def same_tables(self, other: "Grid") -> bool:
        names = ("cells", "faces", "dof_vertices", "dof_edges", "vertex_dof",
                 "edge_dof", "edge_tail", "edge_head", "edge_inside_faces")
        return (self.nx, self.ny) == (other.nx, other.ny) and all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in names
        )


def build_grid(spec: DomainSpec) -> Grid:
    """Build the staggered cell complex and the DOF tables of ``spec``."""
    nx, ny = spec.shape
    cells = np.ones((ny, nx), dtype=bool)
    for i0, j0, i1, j1 in spec.hole_cells():
        cells[j0:j1, i0:i1] = False

    # pad with outside cells so every edge has two neighbours
    pad = np.zeros((ny + 2, nx + 2), dtype=bool)
    pad[1:-1, 1:-1] = cells

    # x-edge (i, j): cells (i, j-1) and (i, j) -> pad rows j and j+1, col i+1
    xin = pad[0:ny + 1, 1:nx + 1].astype(np.int8) + pad[1:ny + 2, 1:nx + 1]
    # y-edge (i, j): cells (i-1, j) and (i, j) -> pad row j+1, cols i and i+1
    yin = pad[1:ny + 1, 0:nx + 1].astype(np.int8) + pad[1:ny + 1, 1:nx + 2]
    edge_inside_faces = np.concatenate([xin.ravel(), yin.ravel()]).astype(np.int8)

    vin = (pad[0:ny + 1, 0:nx + 1] & pad[0:ny + 1, 1:nx + 2]
           & pad[1:ny + 2, 0:nx + 1] & pad[1:ny + 2, 1:nx + 2])

    jj, ii = np.mgrid[0:ny + 1, 0:nx]
    x_tail = (jj * (nx + 1) + ii).ravel()
    jj, ii = np.mgrid[0:ny, 0:nx + 1]
    y_tail = (jj * (nx + 1) + ii).ravel()
    edge_tail = np.concatenate([x_tail, y_tail])
    edge_head = np.concatenate([x_tail + 1, y_tail + nx + 1])

    dof_vertices = np.flatnonzero(vin.ravel())
    dof_edges = np.flatnonzero(edge_inside_faces == 2)
    vertex_dof = np.full(vin.size, -1, dtype=np.int64)
    vertex_dof[dof_vertices] = np.arange(len(dof_vertices))
    edge_dof = np.full(edge_inside_faces.size, -1, dtype=np.int64)
    edge_dof[dof_edges] = np.arange(len(dof_edges))

    arrays = dict(
        cells=cells, faces=np.flatnonzero(cells.ravel()), dof_vertices=dof_vertices,
        dof_edges=dof_edges, vertex_dof=vertex_dof, edge_dof=edge_dof,
        edge_tail=edge_tail, edge_head=edge_head, edge_inside_faces=edge_inside_faces,
    )
    for a in arrays.values():
        a.setflags(write=False)
    return Grid(spec=spec, nx=nx, ny=ny, **arrays)


def _nearest(grid: Grid, u: float, v: float, ni: int, nj: int, offset: int,
             row_len: int) -> int:
    # (u, v): point in grid units shifted so candidate edges sit at integers
    best = None
    for j in sorted({math.floor(v), math.ceil(v)}):
        for i in sorted({math.floor(u), math.ceil(u)}):
            if not (0 <= i < ni and 0 <= j < nj):
                continue
            gidx = offset + j * row_len + i
            if grid.edge_dof[gidx] < 0:
                continue
            d2 = (u - i) ** 2 + (v - j) ** 2
            if best is None or d2 < best[0] or (d2 == best[0] and gidx < best[1]):
                best = (d2, gidx)
    if best is None:
        return -1
    return int(grid.edge_dof[best[1]])


def locate(grid: Grid, point, min_distance: float = 2.0) -> Location:
    """Snap ``point`` to its nearest interior x-edge and y-edge.

    The point must lie at least ``min_distance * h`` away from the conductor.
    Equidistant candidates resolve to the lower edge index.
    """
    x, y = (float(c) for c in point)
    h = grid.h
    dist = grid.boundary_distance((x, y))
    if dist <= 0:
        raise PlacementError((x, y), "point is outside the domain")
    if dist < min_distance * h * (1 - 1e-9):
        raise PlacementError(
            (x, y), f"distance {dist:.6g} to the boundary is below {min_distance:g}h"
        )
    xe = _nearest(grid, x / h - 0.5, y / h, grid.nx, grid.ny + 1, 0, grid.nx)
    ye = _nearest(grid, x / h, y / h - 0.5, grid.nx + 1, grid.ny,
                  grid.n_xedges, grid.nx + 1)
    if xe < 0 or ye < 0:
        raise PlacementError((x, y), "no interior edge nearby")
    return Location(xe, ye)
