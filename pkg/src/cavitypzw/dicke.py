"""Single-mode Dicke model from cavity mode data, exact diagonalization.

Conventions: ``sigma_z = diag(1/2, -1/2)`` and ``sigma_x`` has off-diagonal
entries ``1/2`` (spin-1/2 operators, spin "up" first). The product basis is
``|s_1 ... s_N> (x) |n>`` with atom 0 the most significant factor and the
photon number the fastest index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .electrostatics import DipoleSet
from .exceptions import SolverError, ValidationError
from .modes import ModeBasis, eval_mode_at

MAX_DIM = 2 ** 20
DENSE_MAX = 4096
CUTOFF_STEP = 4
CUTOFF_RTOL = 1e-8

SZ = sp.csr_matrix(np.diag([0.5, -0.5]))
SX = sp.csr_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
# i * sigma_y: real antisymmetric
ISY = sp.csr_matrix(np.array([[0.0, 0.5], [-0.5, 0.0]]))
SPLUS = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


@dataclass(frozen=True)
class DickeParams:
    omega: float
    atom_omegas: tuple
    couplings: tuple
    n_max: int

    def __post_init__(self):
        wa = tuple(float(w) for w in np.atleast_1d(self.atom_omegas))
        g = tuple(float(x) for x in np.atleast_1d(self.couplings))
        object.__setattr__(self, "atom_omegas", wa)
        object.__setattr__(self, "couplings", g)
        if len(wa) != len(g):
            raise ValidationError("one coupling per atom is required")
        if len(wa) < 1:
            raise ValidationError("the Dicke model needs at least one atom")
        if not self.omega > 0 or not all(w > 0 for w in wa):
            raise ValidationError("mode and atomic frequencies must be positive")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if self.dim > MAX_DIM:
            raise ValidationError(
                f"basis dimension {self.dim} exceeds the limit {MAX_DIM}"
            )

    @property
    def n_atoms(self) -> int:
        return len(self.atom_omegas)

    @property
    def dim(self) -> int:
        return 2 ** len(self.atom_omegas) * (int(self.n_max) + 1)

    def with_cutoff(self, n_max: int) -> "DickeParams":
        return replace(self, n_max=n_max)

    def with_couplings(self, couplings) -> "DickeParams":
        return replace(self, couplings=tuple(np.broadcast_to(couplings, (self.n_atoms,))))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    photons: float
    sigma_x: np.ndarray
    field_quadrature: float
    doublet_gap: float
    cutoff_converged: bool
    cutoff_shift: float

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])


def _annihilation(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=np.float64)), 1, format="csr")


def _spin_op(op, k: int, n_atoms: int) -> sp.csr_matrix:
    """``op`` on atom ``k``, identity on the other spins."""
    left = sp.identity(2 ** k, format="csr")
    right = sp.identity(2 ** (n_atoms - k - 1), format="csr")
    return sp.kron(sp.kron(left, op), right, format="csr")


def _embed(spin, boson) -> sp.csr_matrix:
    return sp.kron(spin, boson, format="csr")


def dicke_terms(params: DickeParams, rwa: bool = False):
    """The atomic, interaction and field terms, in that order.

    With ``rwa`` the interaction keeps only the energy-conserving part
    ``g/2 (a sigma_+ + a^dag sigma_-)``.
    """
    N, nb = params.n_atoms, params.n_max + 1
    a = _annihilation(params.n_max)
    ib = sp.identity(nb, format="csr")
    ispin = sp.identity(2 ** N, format="csr")
    atomic = sp.csr_matrix((params.dim, params.dim))
    interaction = sp.csr_matrix((params.dim, params.dim))
    for k, (wa, g) in enumerate(zip(params.atom_omegas, params.couplings)):
        atomic = atomic + wa * _embed(_spin_op(SZ, k, N), ib)
        if rwa:
            up = _embed(_spin_op(SPLUS, k, N), a)
            interaction = interaction + 0.5 * g * (up + up.T)
        else:
            interaction = interaction + g * _embed(_spin_op(SX, k, N), a + a.T)
    field = params.omega * _embed(ispin, a.T @ a)
    return atomic.tocsr(), interaction.tocsr(), field.tocsr()


def build_dicke(params: DickeParams, rwa: bool = False) -> sp.csr_matrix:
    """``sum_A (w_A s_z + g_A (a + a^dag) s_x) + w a^dag a`` as a sparse matrix."""
    atomic, interaction, field = dicke_terms(params, rwa)
    H = (atomic + interaction + field).tocsr()
    H.sort_indices()
    return H


def build_minimal_coupling_single_mode(params: DickeParams, asq_coefficient: float,
                                       dd_matrix=None) -> sp.csr_matrix:
    """Single-mode dipole Hamiltonian of the minimal-coupling picture.

    ``sum_A [w_A s_z + u_A i(a - a^dag) s_y] + v (a + a^dag)^2
    + sum_{A<B} V_AB s_x^A s_x^B + w a^dag a``, with ``u_A`` taken from
    ``params.couplings``. ``v = asq_coefficient`` is the A-square weight
    already summed over the atoms. The ``p.A``
    coupling of a two-level atom enters through ``s_y`` with the quadrature
    ``i(a - a^dag)``, a quarter period out of phase with ``d.E``.
    """
    N = params.n_atoms
    if not asq_coefficient >= 0:
        raise ValidationError("the A-square coefficient must be non-negative")
    V = np.zeros((N, N)) if dd_matrix is None else np.asarray(dd_matrix, dtype=np.float64)
    if V.shape != (N, N) or not np.array_equal(V, V.T):
        raise ValidationError("dipole-dipole matrix must be symmetric N x N")
    a = _annihilation(params.n_max)
    nb = params.n_max + 1
    ib = sp.identity(nb, format="csr")
    ispin = sp.identity(2 ** N, format="csr")
    x = a + a.T
    H = params.omega * _embed(ispin, a.T @ a)
    H = H + asq_coefficient * _embed(ispin, x @ x)
    for k, (wa, u) in enumerate(zip(params.atom_omegas, params.couplings)):
        H = H + wa * _embed(_spin_op(SZ, k, N), ib)
        H = H + u * _embed(_spin_op(ISY, k, N), a - a.T)
    for k in range(N):
        for m in range(k + 1, N):
            if V[k, m] != 0.0:
                sxsx = _spin_op(SX, k, N) @ _spin_op(SX, m, N)
                H = H + V[k, m] * _embed(sxsx, ib)
    H = H.tocsr()
    H.sort_indices()
    return H


def lowest_eigenpairs(H, k: int = 6, dense_max: int = DENSE_MAX):
    """Ascending lowest ``k`` eigenpairs of a real symmetric matrix."""
    n = H.shape[0]
    k = min(k, n)
    if n <= dense_max:
        vals, vecs = la.eigh(H.toarray(), subset_by_index=[0, k - 1])
    else:
        v0 = np.cos(np.arange(n) * 0.37 + 0.1)
        try:
            vals, vecs = spla.eigsh(H, k=k, which="SA", v0=v0, tol=1e-14,
                                    ncv=max(2 * k + 1, 40), maxiter=50 * n)
        except spla.ArpackNoConvergence as exc:
            raise SolverError("Lanczos did not converge for the Dicke ground state") from exc
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    res = float(np.linalg.norm(H @ vecs[:, 0] - vals[0] * vecs[:, 0]))
    if res > 1e-8 * max(1.0, abs(vals[0])):
        raise SolverError("ground-state residual above tolerance", res)
    return vals, vecs


def _ground_energy(params: DickeParams, rwa: bool) -> float:
    vals, _ = lowest_eigenpairs(build_dicke(params, rwa), k=1)
    return float(vals[0])


def ground_state(params: DickeParams, n_eigs: int = 6, rwa: bool = False,
                 H=None) -> Spectrum:
    """Ground-state observables and cutoff diagnostics.

    Cutoff convergence compares ``E0`` against a rerun at ``n_max - 4``.
    """
    H = build_dicke(params, rwa) if H is None else H
    vals, vecs = lowest_eigenpairs(H, k=max(n_eigs, 2))
    psi = vecs[:, 0]
    N, nb = params.n_atoms, params.n_max + 1
    a = _annihilation(params.n_max)
    ispin = sp.identity(2 ** N, format="csr")
    ib = sp.identity(nb, format="csr")
    photons = float(psi @ (_embed(ispin, a.T @ a) @ psi))
    quad = float(psi @ (_embed(ispin, a + a.T) @ psi))
    sx = np.array([float(psi @ (_embed(_spin_op(SX, k, N), ib) @ psi)) for k in range(N)])
    e0 = float(vals[0])
    if params.n_max - CUTOFF_STEP >= 1:
        shift = abs(e0 - _ground_energy(params.with_cutoff(params.n_max - CUTOFF_STEP), rwa))
        converged = shift <= CUTOFF_RTOL * max(1.0, abs(e0))
    else:
        shift, converged = float("nan"), False
    return Spectrum(
        eigenvalues=vals[:n_eigs],
        photons=photons,
        sigma_x=sx,
        field_quadrature=quad,
        doublet_gap=float(vals[1] - vals[0]) if len(vals) > 1 else float("nan"),
        cutoff_converged=bool(converged),
        cutoff_shift=float(shift),
    )


def sweep_coupling(params: DickeParams, g_values, rwa: bool = False) -> list[dict]:
    """Ground-state data per atom along a uniform-coupling sweep.

    Rows failing the cutoff check or the solver are kept and flagged.
    """
    if len(set(params.atom_omegas)) != 1:
        raise ValidationError("coupling sweeps require identical atoms")
    N = params.n_atoms
    rows = []
    for g in g_values:
        row = {"g": float(g)}
        try:
            spec = ground_state(params.with_couplings(float(g)), n_eigs=2, rwa=rwa)
        except SolverError as exc:
            row.update(E0_per_atom=float("nan"), photons_per_atom=float("nan"),
                       converged=False, error=str(exc))
        else:
            row.update(E0_per_atom=spec.ground_energy / N,
                       photons_per_atom=spec.photons / N,
                       converged=spec.cutoff_converged)
        rows.append(row)
    return rows


def couplings(basis: ModeBasis, lam: int, dipoles: DipoleSet) -> np.ndarray:
    """``g_A = sqrt(w/2) d_A . f(x_A)`` for mode ``lam`` (hbar = eps0 = 1)."""
    if not 0 <= lam < len(basis):
        raise ValidationError(f"mode index {lam} out of range [0, {len(basis)})")
    omega = float(basis.omegas[lam])
    if omega == 0.0:
        raise ValidationError("cohomological mode carries no oscillator")
    dipoles.validate(basis.grid)
    return np.array([
        np.sqrt(omega / 2) * float(d @ eval_mode_at(basis, lam, p))
        for p, d in zip(dipoles.positions, dipoles.moments)
    ])


def mean_field_energy(omega: float, atom_omegas, couplings) -> tuple[float, float]:
    """Coherent-state energy ``min_alpha w alpha^2 - sum_A sqrt(w_A^2/4 + g_A^2 alpha^2)``.

    Returns ``(energy, alpha)`` with ``alpha >= 0``.
    """
    wa = np.asarray(atom_omegas, dtype=np.float64)
    g = np.asarray(couplings, dtype=np.float64)

    def energy(alpha):
        return omega * alpha ** 2 - np.sum(np.sqrt(wa ** 2 / 4 + g ** 2 * alpha ** 2))

    # beyond this alpha the quadratic term dominates every linear growth
    upper = 1.0 + np.sum(np.abs(g)) / omega
    res = minimize_scalar(energy, bounds=(0.0, upper), method="bounded",
                          options={"xatol": 1e-12})
    best = min((energy(0.0), 0.0), (float(res.fun), float(res.x)))
    return best


def critical_coupling(omega: float, atom_omega: float, n_atoms: int) -> float:
    """Uniform coupling where the mean-field curvature at ``alpha = 0`` vanishes."""
    return float(np.sqrt(omega * atom_omega / n_atoms))
