"""Multipolar cavity QED on 2D domains with holes.

Discrete Helmholtz-Hodge decomposition, transverse cavity modes, the dipole
energy cancellation that removes the A-square and dipole-dipole terms, and
exact diagonalization of the resulting single-mode Dicke model.
"""

from .dicke import (DickeParams, Spectrum, build_dicke, build_minimal_coupling_single_mode,
                    couplings, critical_coupling, ground_state, mean_field_energy,
                    sweep_coupling)
from .electrostatics import (DipoleSet, EnergyReport, dipole_charges, dipole_polarization,
                             energy_report, pair_energy_green, verify_condition13)
from .estimators import HodgeDecomposition, TransverseModeProjector
from .exceptions import PlacementError, SolverError, ValidationError
from .geometry import DomainSpec, Grid, Location, build_grid, locate
from .hodge import (HarmonicBasis, HodgeSplit, harmonic_basis, poisson_dirichlet,
                    project_Q, project_R)
from .modes import ModeBasis, eval_mode_at, transverse_modes
from .operators import (FieldVector, SparseOperator, build_curl, build_div0, build_grad0,
                        inner, inner_scalar)

__version__ = "0.1.0"
