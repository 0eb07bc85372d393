"""Point-dipole polarization fields and the Coulomb energy bookkeeping.

Each dipole is smeared over a single x-edge and a single y-edge with weight
``1/h^2``, so that its charge density ``rho = -div P`` is an exact pair of
opposite point charges on the edge endpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PlacementError, ValidationError
from .geometry import Grid, locate
from .hodge import poisson_dirichlet, project_q_values
from .operators import FieldVector, build_div0, inner, inner_scalar, operators_for

_ATOM_KEYS = {"x", "y", "dx", "dy", "omega"}


@dataclass(frozen=True, eq=False)
class DipoleSet:
    """Atoms with positions ``(N, 2)``, dipole moments ``(N, 2)`` and frequencies."""

    positions: np.ndarray
    moments: np.ndarray
    omegas: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        mom = np.asarray(self.moments, dtype=np.float64).reshape(-1, 2)
        om = np.asarray(self.omegas, dtype=np.float64).reshape(-1)
        if not (len(pos) == len(mom) == len(om)):
            raise ValidationError("positions, moments and omegas differ in length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(mom))):
            raise ValidationError("dipole data must be finite")
        if np.any(om <= 0):
            raise ValidationError("atomic transition frequencies must be positive")
        for name, a in (("positions", pos), ("moments", mom), ("omegas", om)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.omegas)

    def scaled(self, factor: float) -> "DipoleSet":
        return DipoleSet(self.positions, self.moments * factor, self.omegas)

    def subset(self, index) -> "DipoleSet":
        index = np.atleast_1d(index)
        return DipoleSet(self.positions[index], self.moments[index], self.omegas[index])

    def validate(self, grid: Grid) -> None:
        """Atoms at least ``2h`` from the conductor and ``4h`` from each other."""
        h = grid.h
        for a, p in enumerate(self.positions):
            try:
                locate(grid, p)
            except PlacementError as exc:
                raise PlacementError(p, f"atom {a}: {exc.reason}") from None
        for a in range(len(self)):
            for b in range(a + 1, len(self)):
                d = float(np.hypot(*(self.positions[a] - self.positions[b])))
                if d < 4 * h * (1 - 1e-9):
                    raise ValidationError(
                        f"atoms {a} and {b} are {d:.6g} apart, closer than 4h"
                    )

    @classmethod
    def from_dict(cls, doc: dict) -> "DipoleSet":
        if not isinstance(doc, dict) or set(doc) != {"atoms"}:
            raise ValidationError('dipoles document must be {"atoms": [...]}')
        atoms = doc["atoms"]
        if not isinstance(atoms, list):
            raise ValidationError('"atoms" must be a list')
        rows = []
        for k, atom in enumerate(atoms):
            if not isinstance(atom, dict) or set(atom) != _ATOM_KEYS:
                raise ValidationError(
                    f"atom {k} must have exactly the keys {sorted(_ATOM_KEYS)}"
                )
            try:
                rows.append([float(atom[key]) for key in ("x", "y", "dx", "dy", "omega")])
            except (TypeError, ValueError):
                raise ValidationError(f"atom {k} has non-numeric entries") from None
        data = np.asarray(rows, dtype=np.float64).reshape(-1, 5)
        return cls(data[:, 0:2], data[:, 2:4], data[:, 4])

    @classmethod
    def from_json(cls, path) -> "DipoleSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"atoms": [
            {"x": p[0], "y": p[1], "dx": d[0], "dy": d[1], "omega": w}
            for p, d, w in zip(self.positions.tolist(), self.moments.tolist(),
                               self.omegas.tolist())
        ]}


@dataclass(frozen=True)
class EnergyReport:
    """Field energies of a polarization ``P`` (all with ``eps0``)."""

    total: float
    longitudinal: float
    transverse: float
    coulomb_direct: float
    self_energies: list = field(default_factory=list)
    cross_terms: dict = field(default_factory=dict)

    def cancellation_residual(self) -> float:
        """Relative defect of ``coulomb + transverse = total``."""
        if self.total == 0:
            return abs(self.coulomb_direct + self.transverse)
        return abs(self.coulomb_direct + self.transverse - self.total) / abs(self.total)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "longitudinal": self.longitudinal,
            "transverse": self.transverse,
            "coulomb_direct": self.coulomb_direct,
            "self_energies": list(self.self_energies),
            "cross_terms": [{"a": a, "b": b, "value": v}
                            for (a, b), v in sorted(self.cross_terms.items())],
            "cancellation_residual": self.cancellation_residual(),
        }


def atom_polarizations(dipoles: DipoleSet, grid: Grid) -> np.ndarray:
    """``(n_dof_edges, N)`` array whose column ``A`` is the field of atom ``A``."""
    dipoles.validate(grid)
    out = np.zeros((grid.n_dof_edges, len(dipoles)))
    inv_area = 1.0 / grid.h ** 2
    for a, (p, d) in enumerate(zip(dipoles.positions, dipoles.moments)):
        loc = locate(grid, p)
        out[loc.x_edge, a] = d[0] * inv_area
        out[loc.y_edge, a] = d[1] * inv_area
    return out


def dipole_polarization(dipoles: DipoleSet, grid: Grid) -> FieldVector:
    """Total polarization ``P = sum_A d_A delta_h(x - x_A)``."""
    return FieldVector(atom_polarizations(dipoles, grid).sum(axis=1), grid)


def dipole_charges(dipoles: DipoleSet, grid: Grid) -> np.ndarray:
    """Charge density of the dipoles' point-charge pairs on the DOF vertices.

    Each component ``d`` becomes charges ``-+ d/h`` at the tail and head of
    its edge, i.e. densities ``-+ d/h^3``. Built from the charges directly,
    not from ``div P``.
    """
    dipoles.validate(grid)
    rho = np.zeros(grid.n_dof_vertices)
    h3 = grid.h ** 3
    for p, d in zip(dipoles.positions, dipoles.moments):
        loc = locate(grid, p)
        for dof, comp in ((loc.x_edge, d[0]), (loc.y_edge, d[1])):
            e = grid.dof_edges[dof]
            rho[grid.vertex_dof[grid.edge_head[e]]] += comp / h3
            rho[grid.vertex_dof[grid.edge_tail[e]]] -= comp / h3
    return rho


def energy_report(dipoles: DipoleSet, grid: Grid, eps0: float = 1.0) -> EnergyReport:
    """Split the polarization energy into Coulomb and transverse parts.

    The Coulomb energy is computed twice: through ``Q P`` and through a
    separate Poisson solve for the charge density ``rho = -div P``.
    """
    if len(dipoles) == 0:
        return EnergyReport(0.0, 0.0, 0.0, 0.0, [], {})
    PA = atom_polarizations(dipoles, grid)
    QPA, _ = project_q_values(grid, PA)
    P = FieldVector(PA.sum(axis=1), grid)
    QP = FieldVector(QPA.sum(axis=1), grid)
    RP = P - QP

    rho = -(build_div0(grid) @ P.values)
    U = poisson_dirichlet(grid, rho, eps0)
    gradU = FieldVector(operators_for(grid).G @ U, grid)

    h2 = grid.h ** 2
    gram = h2 * (QPA.T @ QPA)
    self_energies = [float(gram[a, a] / (2 * eps0)) for a in range(len(dipoles))]
    cross = {(a, b): float(gram[a, b] / eps0)
             for a in range(len(dipoles)) for b in range(a + 1, len(dipoles))}
    return EnergyReport(
        total=inner(P, P) / (2 * eps0),
        longitudinal=inner(QP, QP) / (2 * eps0),
        transverse=inner(RP, RP) / (2 * eps0),
        coulomb_direct=eps0 / 2 * inner(gradU, gradU),
        self_energies=self_energies,
        cross_terms=cross,
    )


def pair_energy_green(dipoles: DipoleSet, grid: Grid, a: int, b: int,
                      eps0: float = 1.0) -> float:
    """Interaction energy of atoms ``a`` and ``b`` as ``<rho_a, U_b>``.

    ``U_b`` is the Dirichlet potential of atom ``b``'s charges alone; no
    projection of the polarization field is involved.
    """
    rho_a = dipole_charges(dipoles.subset(a), grid)
    rho_b = dipole_charges(dipoles.subset(b), grid)
    U_b = poisson_dirichlet(grid, rho_b, eps0)
    return inner_scalar(grid, rho_a, U_b)


def verify_condition13(dipoles: DipoleSet, grid: Grid) -> tuple[float, float]:
    """Residuals ``max|div P + rho|`` and ``max|div QP - div P|``.

    Both are divided by ``max|rho|``, the charge-density scale ``|d|/h^3``
    of the configuration.
    """
    if len(dipoles) == 0:
        return 0.0, 0.0
    D = build_div0(grid)
    P = dipole_polarization(dipoles, grid)
    rho = dipole_charges(dipoles, grid)
    scale = float(np.abs(rho).max(initial=0.0))
    if scale == 0.0:
        return 0.0, 0.0
    divP = D @ P.values
    QP, _ = project_q_values(grid, P.values)
    return (float(np.abs(divP + rho).max()) / scale,
            float(np.abs(D @ QP - divP).max()) / scale)
