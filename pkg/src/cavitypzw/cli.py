"""Command line entry point: ``cavitypzw <subcommand> [options]``.

Exit codes: 0 success, 2 validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _linalg, dicke, io
from .electrostatics import DipoleSet, energy_report, verify_condition13
from .exceptions import SolverError, ValidationError
from .geometry import DomainSpec, build_grid
from .hodge import harmonic_basis, hodge_report, project_Q
from .modes import mode_residuals, transverse_modes
from .operators import FieldVector, build_curl, build_grad0

log = logging.getLogger("cavitypzw")

SUBCOMMANDS = ("grid", "hodge", "modes", "coulomb", "dicke", "pipeline")

# acceptance limits recorded in every pipeline manifest
CHECK_LIMITS = {
    "mode_eigen_residual": 1e-8,
    "mode_divergence": 1e-8,
    "mode_orthonormality": 1e-10,
    "cancellation_residual": 1e-8,
    "longitudinal_vs_coulomb": 1e-8,
    "div_p_plus_rho": 1e-13,
    "div_qp_minus_div_p": 1e-10,
}


@dataclass
class RunConfig:
    subcommand: str
    out: str = "out"
    domain: str | None = None
    dipoles: str | None = None
    params: str | None = None
    field_path: str | None = None
    mode: int = 0
    count: int = 6
    nmax: int | None = None
    g_scale: list = field(default_factory=lambda: [1.0])
    tol: float = _linalg.CG_RTOL
    seed: int = 42
    threads: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown run-config keys: {sorted(unknown)}")
        if doc.get("subcommand") not in SUBCOMMANDS:
            raise ValidationError(f"subcommand must be one of {SUBCOMMANDS}")
        cfg = cls(**doc)
        if not cfg.tol > 0:
            raise ValidationError("--tol must be positive")
        return cfg


def _domain(cfg: RunConfig):
    if cfg.domain is None:
        raise ValidationError("--domain is required")
    spec = DomainSpec.from_json(cfg.domain)
    return build_grid(spec)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def grid_summary(grid) -> dict:
    return {
        "nx": grid.nx, "ny": grid.ny, "spacing": grid.h,
        "n_vertices": grid.nV, "n_edges": grid.nE, "n_faces": grid.nF,
        "n_dof_vertices": grid.n_dof_vertices, "n_dof_edges": grid.n_dof_edges,
        "n_holes": grid.n_holes,
        "euler_characteristic": grid.euler_characteristic(),
        "boundary_components": grid.boundary_components(),
    }


def cmd_grid(cfg: RunConfig) -> dict:
    grid = _domain(cfg)
    out = _out(cfg)
    io.write_json(out / "grid.json", grid_summary(grid))
    build_grad0(grid).dump(out / "grad0.txt")
    build_curl(grid).dump(out / "curl.txt")
    return {"grid": grid_summary(grid)}


def cmd_hodge(cfg: RunConfig) -> dict:
    grid = _domain(cfg)
    out = _out(cfg)
    if cfg.field_path is not None:
        values = io.read_array(cfg.field_path)
    else:
        values = np.random.default_rng(cfg.seed).standard_normal(grid.n_dof_edges)
    v = FieldVector(values.reshape(-1), grid)
    split = project_Q(v, rtol=cfg.tol)
    io.write_array(out / "gradient.bin", split.gradient_part.values)
    io.write_array(out / "divfree.bin", split.divfree_part.values)
    io.write_array(out / "potential.bin", split.potential)
    report = hodge_report(v, split)
    io.write_json(out / "report.json", report)
    return report


def _write_modes(out: Path, basis) -> None:
    io.write_csv(out / "omegas.csv", ["index", "omega"],
                 [(i, float(w)) for i, w in enumerate(basis.omegas)])
    io.write_array(out / "modes.bin", basis.as_matrix().T)


def cmd_modes(cfg: RunConfig) -> dict:
    grid = _domain(cfg)
    out = _out(cfg)
    basis = transverse_modes(grid, cfg.count)
    _write_modes(out, basis)
    return {"omegas": basis.omegas.tolist(), "zero_mode_count": basis.zero_mode_count,
            **mode_residuals(basis)}


def _coulomb_payload(dipoles, grid) -> dict:
    report = energy_report(dipoles, grid)
    r13 = verify_condition13(dipoles, grid)
    payload = report.to_dict()
    payload["condition13"] = {"div_p_plus_rho": r13[0], "div_qp_minus_div_p": r13[1]}
    return payload


def cmd_coulomb(cfg: RunConfig) -> dict:
    grid = _domain(cfg)
    if cfg.dipoles is None:
        raise ValidationError("--dipoles is required")
    dipoles = DipoleSet.from_json(cfg.dipoles)
    payload = _coulomb_payload(dipoles, grid)
    io.write_json(_out(cfg) / "energy.json", payload)
    return payload


_PARAM_KEYS = {"omega", "n_max", "atoms", "g_values", "rwa"}


def load_dicke_params(path, nmax=None):
    """Parse ``{"omega", "n_max", "atoms": [{"omega", "g"}], "g_values"?, "rwa"?}``."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError("params document must be a JSON object")
    unknown = set(doc) - _PARAM_KEYS
    if unknown:
        raise ValidationError(f"unknown params keys: {sorted(unknown)}")
    try:
        atoms = doc["atoms"]
        for k, atom in enumerate(atoms):
            if set(atom) != {"omega", "g"}:
                raise ValidationError(f'atom {k} must have exactly the keys ["g", "omega"]')
        params = dicke.DickeParams(
            omega=float(doc["omega"]),
            atom_omegas=[float(a["omega"]) for a in atoms],
            couplings=[float(a["g"]) for a in atoms],
            n_max=int(nmax if nmax is not None else doc.get("n_max", 40)),
        )
    except KeyError as exc:
        raise ValidationError(f"missing params key {exc}") from None
    except (TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed params document: {exc}") from None
    return params, doc.get("g_values"), bool(doc.get("rwa", False))


def _sweep_rows(rows, key="g"):
    return [(r[key], r["E0_per_atom"], r["photons_per_atom"], r["converged"]) for r in rows]


def cmd_dicke(cfg: RunConfig) -> dict:
    if cfg.params is None:
        raise ValidationError("--params is required")
    params, g_values, rwa = load_dicke_params(cfg.params, cfg.nmax)
    out = _out(cfg)
    spec = dicke.ground_state(params, rwa=rwa)
    payload = {
        "eigenvalues": spec.eigenvalues, "photons": spec.photons,
        "sigma_x": spec.sigma_x, "field_quadrature": spec.field_quadrature,
        "doublet_gap": spec.doublet_gap, "cutoff_converged": spec.cutoff_converged,
        "cutoff_shift": spec.cutoff_shift,
    }
    io.write_json(out / "spectrum.json", payload)
    if g_values is not None:
        rows = dicke.sweep_coupling(params, g_values, rwa=rwa)
        io.write_csv(out / "sweep.csv", ["g", "E0_per_atom", "photons_per_atom", "converged"],
                     _sweep_rows(rows))
        payload["sweep"] = rows
    return payload


class StageError(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


def _check(value, limit):
    return {"value": float(value), "limit": float(limit), "pass": bool(value <= limit)}


def run_pipeline(domain: DomainSpec, dipoles: DipoleSet, mode_index: int, g_scale_list,
                 out, n_max: int = 40, tol: float = _linalg.CG_RTOL, seed: int = 42) -> dict:
    """grid -> modes -> coulomb -> couplings -> dicke, with a checksummed manifest.

    Raises :class:`StageError` naming the first failing stage; the manifest
    written up to that point records the failure.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "inputs": {"domain": domain.to_dict(), "dipoles": dipoles.to_dict(),
                   "mode": mode_index, "g_scale": [float(s) for s in g_scale_list],
                   "n_max": n_max, "seed": seed},
        "tolerances": {"cg_rtol": tol, "eig_residual_rtol": _linalg.EIG_RESIDUAL_RTOL,
                       "cluster_rtol": _linalg.CLUSTER_RTOL, "zero_rtol": 1e-10,
                       "cutoff_rtol": dicke.CUTOFF_RTOL, "checks": CHECK_LIMITS},
        "constants": {"eps0": 1.0, "c": 1.0, "hbar": 1.0, "mode_shift": 1.0,
                      "spin_convention": "sigma_z = diag(1/2, -1/2)",
                      "coupling_normalization": "g = sqrt(omega/2) d.f(x)",
                      "cutoff_step": dicke.CUTOFF_STEP,
                      "dense_solve_max": _linalg.DENSE_SOLVE_MAX,
                      "dense_eig_max": _linalg.DENSE_EIG_MAX},
        "stages": [],
    }

    def stage(name, func):
        entry = {"name": name}
        try:
            checks, outputs = func()
        except (ValidationError, SolverError) as exc:
            entry.update(status="failed", error=f"{type(exc).__name__}: {exc}")
            manifest["stages"].append(entry)
            io.write_json(out / "manifest.json", manifest)
            raise StageError(name, exc) from exc
        entry["checks"] = checks
        entry["outputs"] = {f: io.sha256(out / f) for f in outputs}
        entry["status"] = "ok" if all(c["pass"] for c in checks.values()) else "checks_failed"
        manifest["stages"].append(entry)

    state = {}

    def s_grid():
        grid = state["grid"] = build_grid(domain)
        summary = grid_summary(grid)
        io.write_json(out / "grid.json", summary)
        checks = {
            "euler_characteristic": {"value": summary["euler_characteristic"],
                                     "expected": 1 - grid.n_holes,
                                     "pass": summary["euler_characteristic"] == 1 - grid.n_holes},
        }
        return checks, ["grid.json"]

    def s_modes():
        grid = state["grid"]
        basis = state["modes"] = transverse_modes(grid, mode_index + 1)
        res = mode_residuals(basis)
        _write_modes(out, basis)
        n_harm = harmonic_basis(grid).dimension
        checks = {
            "mode_eigen_residual": _check(res["eigen"], CHECK_LIMITS["mode_eigen_residual"]),
            "mode_divergence": _check(res["divergence"], CHECK_LIMITS["mode_divergence"]),
            "mode_orthonormality": _check(res["orthonormality"],
                                          CHECK_LIMITS["mode_orthonormality"]),
            "zero_modes_match_harmonic": {
                "value": basis.zero_mode_count, "expected": min(n_harm, mode_index + 1),
                "pass": basis.zero_mode_count == min(n_harm, mode_index + 1)},
        }
        return checks, ["omegas.csv", "modes.bin"]

    def s_coulomb():
        payload = _coulomb_payload(dipoles, state["grid"])
        io.write_json(out / "energy.json", payload)
        long_rel = abs(payload["longitudinal"] - payload["coulomb_direct"]) / max(
            abs(payload["longitudinal"]), 1e-300)
        checks = {
            "cancellation_residual": _check(payload["cancellation_residual"],
                                            CHECK_LIMITS["cancellation_residual"]),
            "longitudinal_vs_coulomb": _check(long_rel, CHECK_LIMITS["longitudinal_vs_coulomb"]),
            "div_p_plus_rho": _check(payload["condition13"]["div_p_plus_rho"],
                                     CHECK_LIMITS["div_p_plus_rho"]),
            "div_qp_minus_div_p": _check(payload["condition13"]["div_qp_minus_div_p"],
                                         CHECK_LIMITS["div_qp_minus_div_p"]),
        }
        return checks, ["energy.json"]

    def s_couplings():
        basis = state["modes"]
        if len(dipoles):
            g = dicke.couplings(basis, mode_index, dipoles)
        else:
            g = np.zeros(0)
        state["g"] = g
        io.write_csv(out / "couplings.csv", ["atom", "g"], [(i, float(x)) for i, x in enumerate(g)])
        checks = {"mode_frequency_positive": {"value": float(basis.omegas[mode_index]),
                                              "pass": bool(basis.omegas[mode_index] > 0)}}
        return checks, ["couplings.csv"]

    def s_dicke():
        omega = float(state["modes"].omegas[mode_index])
        params = dicke.DickeParams(omega, dipoles.omegas, state["g"], n_max)
        rows = []
        for s in g_scale_list:
            scaled = params.with_couplings(np.asarray(params.couplings) * float(s))
            spec = dicke.ground_state(scaled, n_eigs=2)
            rows.append({"g_scale": float(s), "E0_per_atom": spec.ground_energy / len(dipoles),
                         "photons_per_atom": spec.photons / len(dipoles),
                         "converged": spec.cutoff_converged})
        io.write_csv(out / "dicke.csv",
                     ["g_scale", "E0_per_atom", "photons_per_atom", "converged"],
                     _sweep_rows(rows, key="g_scale"))
        checks = {"cutoff_converged": {"value": sum(r["converged"] for r in rows),
                                       "expected": len(rows),
                                       "pass": all(r["converged"] for r in rows)}}
        return checks, ["dicke.csv"]

    for name, func in (("grid", s_grid), ("modes", s_modes), ("coulomb", s_coulomb),
                       ("couplings", s_couplings), ("dicke", s_dicke)):
        stage(name, func)
    io.write_json(out / "manifest.json", manifest)
    return manifest


def cmd_pipeline(cfg: RunConfig) -> dict:
    if cfg.domain is None or cfg.dipoles is None:
        raise ValidationError("--domain and --dipoles are required")
    spec = DomainSpec.from_json(cfg.domain)
    dipoles = DipoleSet.from_json(cfg.dipoles)
    manifest = run_pipeline(spec, dipoles, cfg.mode, cfg.g_scale, cfg.out,
                            n_max=cfg.nmax if cfg.nmax is not None else 40,
                            tol=cfg.tol, seed=cfg.seed)
    return {"stages": [(s["name"], s["status"]) for s in manifest["stages"]]}


COMMANDS = {"grid": cmd_grid, "hodge": cmd_hodge, "modes": cmd_modes,
            "coulomb": cmd_coulomb, "dicke": cmd_dicke, "pipeline": cmd_pipeline}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; command-line flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", type=float, help="Poisson solver relative tolerance")
    common.add_argument("--seed", type=int, help="seed for randomized inputs (default 42)")
    common.add_argument("--threads", type=int, help="BLAS thread count")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cavitypzw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    p = sub.add_parser("grid", parents=[common], help="build grid, dump operators")
    p.add_argument("--domain")
    p = sub.add_parser("hodge", parents=[common], help="split a field into Q and R parts")
    p.add_argument("--domain")
    p.add_argument("--field", dest="field_path", help="HCAV field (default: seeded random field)")
    p = sub.add_parser("modes", parents=[common], help="transverse cavity modes")
    p.add_argument("--domain")
    p.add_argument("--count", type=int, help="number of modes (default 6)")
    p = sub.add_parser("coulomb", parents=[common], help="dipole energy report")
    p.add_argument("--domain")
    p.add_argument("--dipoles")
    p = sub.add_parser("dicke", parents=[common], help="Dicke ground state / coupling sweep")
    p.add_argument("--params")
    p.add_argument("--nmax", type=int)
    p = sub.add_parser("pipeline", parents=[common], help="full grid-to-Dicke run")
    p.add_argument("--domain")
    p.add_argument("--dipoles")
    p.add_argument("--mode", type=int)
    p.add_argument("--nmax", type=int)
    p.add_argument("--g-scale", dest="g_scale", type=float, nargs="+")
    return parser


def config_from_args(args) -> RunConfig:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValidationError("run config must be a JSON object")
    skip = {"config", "verbose"}
    for key, value in vars(args).items():
        if key not in skip and value is not None:
            doc[key] = value
    doc["subcommand"] = args.subcommand
    return RunConfig.from_dict(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.threads is not None:
            from threadpoolctl import threadpool_limits
            threadpool_limits(cfg.threads)
        result = COMMANDS[cfg.subcommand](cfg)
    except StageError as exc:
        log.error("%s", exc)
        return 3 if isinstance(exc.cause, SolverError) else 2
    except ValidationError as exc:
        log.error("validation failed: %s", exc)
        return 2
    except SolverError as exc:
        log.error("solver failed: %s", exc)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        log.error("cannot read input: %s", exc)
        return 2
    log.info("%s", json.dumps(io._clean(result))[:2000])
    return 0


if __name__ == "__main__":
    sys.exit(main())
