import csv
import json

import numpy as np
import pytest

from cavitypzw import DipoleSet, DomainSpec, SolverError, ValidationError, build_grid
from cavitypzw import cli, io
from cavitypzw.cli import RunConfig, StageError, main, run_pipeline
from cavitypzw.operators import SparseOperator, build_curl, build_grad0


@pytest.fixture
def inputs(tmp_path):
    domain = {"width": 1.0, "height": 1.0, "spacing": 0.0625, "holes": [[0.375, 0.375, 0.25, 0.25]]}
    dipoles = {"atoms": [{"x": 0.2, "y": 0.2, "dx": 0.0, "dy": 1.0, "omega": 3.0},
                         {"x": 0.8, "y": 0.7, "dx": 1.0, "dy": 0.5, "omega": 3.0}]}
    params = {"omega": 1.0, "n_max": 24, "atoms": [{"omega": 1.0, "g": 0.3}] * 2,
              "g_values": [0.2, 0.6]}
    paths = {}
    for name, doc in (("domain", domain), ("dipoles", dipoles), ("params", params)):
        paths[name] = tmp_path / f"{name}.json"
        paths[name].write_text(json.dumps(doc))
    return paths


class TestHcav:
    @pytest.mark.parametrize("shape", [(), (5,), (3, 4), (2, 3, 2)])
    def test_round_trip(self, tmp_path, shape, rng):
        a = rng.standard_normal(shape)
        io.write_array(tmp_path / "a.bin", a)
        b = io.read_array(tmp_path / "a.bin")
        assert b.shape == a.shape and np.array_equal(a, b)

    def test_layout(self, tmp_path):
        io.write_array(tmp_path / "a.bin", np.array([[1.0, 2.0, 3.0]]))
        raw = (tmp_path / "a.bin").read_bytes()
        assert raw[:4] == b"HCAV"
        assert raw[4:12] == (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
        assert raw[12:28] == (1).to_bytes(8, "little") + (3).to_bytes(8, "little")
        assert np.frombuffer(raw[28:], "<f8").tolist() == [1.0, 2.0, 3.0]

    def test_rejects_corruption(self, tmp_path):
        p = tmp_path / "a.bin"
        io.write_array(p, np.ones(4))
        raw = p.read_bytes()
        p.write_bytes(b"XXXX" + raw[4:])
        with pytest.raises(ValidationError, match="magic"):
            io.read_array(p)
        p.write_bytes(raw[:-8])
        with pytest.raises(ValidationError, match="size"):
            io.read_array(p)


def test_json_is_canonical(tmp_path):
    io.write_json(tmp_path / "a.json", {"b": np.float64(1.5), "a": [np.int64(2), np.nan]})
    assert (tmp_path / "a.json").read_text() == '{\n  "a": [\n    2,\n    null\n  ],\n  "b": 1.5\n}\n'


def test_grid_subcommand(tmp_path, inputs):
    out = tmp_path / "o"
    assert main(["grid", "--domain", str(inputs["domain"]), "--out", str(out)]) == 0
    summary = json.loads((out / "grid.json").read_text())
    assert summary["n_holes"] == 1 and summary["euler_characteristic"] == 0
    g = build_grid(DomainSpec.from_json(inputs["domain"]))
    assert SparseOperator.load(out / "grad0.txt").same_triplets(build_grad0(g))
    assert SparseOperator.load(out / "curl.txt").same_triplets(build_curl(g))


def test_hodge_subcommand(tmp_path, inputs):
    g = build_grid(DomainSpec.from_json(inputs["domain"]))
    field = np.random.default_rng(3).standard_normal(g.n_dof_edges)
    io.write_array(tmp_path / "v.bin", field)
    out = tmp_path / "o"
    assert main(["hodge", "--domain", str(inputs["domain"]), "--field", str(tmp_path / "v.bin"),
                 "--out", str(out)]) == 0
    q, r = io.read_array(out / "gradient.bin"), io.read_array(out / "divfree.bin")
    assert np.allclose(q + r, field, atol=1e-12)
    report = json.loads((out / "report.json").read_text())
    assert report["dim_harmonic"] == 1
    assert report["orthogonality_residual"] <= 1e-10
    # default seeded field
    assert main(["hodge", "--domain", str(inputs["domain"]), "--out", str(tmp_path / "s")]) == 0


def test_hodge_rejects_wrong_length(tmp_path, inputs):
    io.write_array(tmp_path / "v.bin", np.ones(7))
    assert main(["hodge", "--domain", str(inputs["domain"]), "--field", str(tmp_path / "v.bin"),
                 "--out", str(tmp_path / "o")]) == 2


def test_modes_subcommand(tmp_path, inputs):
    out = tmp_path / "o"
    assert main(["modes", "--domain", str(inputs["domain"]), "--count", "4", "--out", str(out)]) == 0
    with open(out / "omegas.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "omega"] and len(rows) == 5
    assert float(rows[1][1]) == 0.0  # the annulus carries one harmonic field
    assert io.read_array(out / "modes.bin").shape[0] == 4


def test_coulomb_subcommand(tmp_path, inputs):
    out = tmp_path / "o"
    assert main(["coulomb", "--domain", str(inputs["domain"]), "--dipoles",
                 str(inputs["dipoles"]), "--out", str(out)]) == 0
    rep = json.loads((out / "energy.json").read_text())
    assert rep["cancellation_residual"] <= 1e-8
    assert rep["cross_terms"][0]["a"] == 0 and rep["cross_terms"][0]["b"] == 1


def test_dicke_subcommand(tmp_path, inputs):
    out = tmp_path / "o"
    assert main(["dicke", "--params", str(inputs["params"]), "--out", str(out)]) == 0
    spec = json.loads((out / "spectrum.json").read_text())
    assert spec["cutoff_converged"] is True
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["g"]) for r in rows] == [0.2, 0.6]


def test_exit_code_validation(tmp_path, inputs):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"width": 1, "height": 1, "spacing": 0.125,
                               "holes": [[0.0, 0.25, 0.25, 0.25]]}))
    assert main(["grid", "--domain", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["grid", "--out", str(tmp_path / "o")]) == 2
    assert main(["grid", "--domain", str(tmp_path / "missing.json")]) == 2
    assert main(["grid", "--domain", str(inputs["domain"]), "--tol", "-1"]) == 2


def test_exit_code_solver(tmp_path, inputs, monkeypatch):
    def boom(cfg):
        raise SolverError("did not converge", residual=1.0)
    monkeypatch.setitem(cli.COMMANDS, "modes", boom)
    assert main(["modes", "--domain", str(inputs["domain"])]) == 3


def test_config_file_and_override(tmp_path, inputs):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"domain": str(inputs["domain"]), "out": str(tmp_path / "a"),
                               "count": 2}))
    assert main(["modes", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "omegas.csv").exists() and not (tmp_path / "a").exists()
    cfg.write_text(json.dumps({"domain": str(inputs["domain"]), "colour": "red"}))
    assert main(["modes", "--config", str(cfg)]) == 2


def test_run_config_strict():
    with pytest.raises(ValidationError, match="unknown"):
        RunConfig.from_dict({"subcommand": "grid", "bogus": 1})
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"subcommand": "fly"})


def test_pipeline_manifest(tmp_path, inputs):
    spec = DomainSpec.from_json(inputs["domain"])
    dipoles = DipoleSet.from_json(inputs["dipoles"])
    m = run_pipeline(spec, dipoles, 1, [0.5, 1.0], tmp_path / "o", n_max=20)
    assert [s["name"] for s in m["stages"]] == ["grid", "modes", "coulomb", "couplings", "dicke"]
    assert all(s["status"] == "ok" for s in m["stages"])
    for s in m["stages"]:
        for f, digest in s["outputs"].items():
            assert io.sha256(tmp_path / "o" / f) == digest


def test_pipeline_rejects_zero_mode(tmp_path, inputs):
    spec = DomainSpec.from_json(inputs["domain"])
    dipoles = DipoleSet.from_json(inputs["dipoles"])
    with pytest.raises(StageError) as exc:
        run_pipeline(spec, dipoles, 0, [1.0], tmp_path / "o")
    assert exc.value.stage == "couplings"
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["stages"][-1]["status"] == "failed"


def test_pipeline_without_atoms(tmp_path, inputs):
    spec = DomainSpec.from_json(inputs["domain"])
    with pytest.raises(StageError) as exc:
        run_pipeline(spec, DipoleSet.from_dict({"atoms": []}), 1, [1.0], tmp_path / "o")
    assert exc.value.stage == "dicke"
    energy = json.loads((tmp_path / "o" / "energy.json").read_text())
    assert energy["total"] == 0 and energy["longitudinal"] == 0


def test_pipeline_cli_is_byte_identical(tmp_path, inputs):
    def run(name):
        out = tmp_path / name
        code = main(["pipeline", "--domain", str(inputs["domain"]), "--dipoles",
                     str(inputs["dipoles"]), "--mode", "1", "--nmax", "16",
                     "--g-scale", "0.5", "2", "--out", str(out)])
        assert code == 0
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    a, b = run("a"), run("b")
    assert a.keys() == b.keys() and "manifest.json" in a
    assert all(a[k] == b[k] for k in a)
