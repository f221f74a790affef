"""Config loading and the command-line surface, end to end on tiny models."""

import json
import math

import numpy as np
import pytest

from fermifock.cli import main
from fermifock.config import (
    build_bundle,
    build_kernel_spec,
    build_species,
    config_digest,
    load_config,
    mass_grid_entries,
    normalize_config,
    to_jsonable,
)
from fermifock.fock import load_triplets

TOY_ENERGY = 1.0 - math.sqrt(2.0)


def toy_config():
    """Two single-mode species with a constant pair-creation kernel."""
    return {
        "species": [
            {"mass": 1.0, "points": [[0.0, 0.0, 0.0]], "weights": [1.0], "spins": [0.5]},
            {"mass": 1.0, "points": [[0.0, 0.0, 0.0]], "weights": [1.0], "spins": [0.5]},
        ],
        "kernels": [{"kind": "constant", "created": [0, 1], "value": 1.0}],
        "coupling": 1.0,
        "solver": {"trials": 300},
    }


def sweep_config():
    """Two two-mode species, both swept to zero mass one after the other."""
    return {
        "species": [
            {
                "mass": 1.0,
                "points": [[0.3, 0.0, 0.0], [0.6, 0.0, 0.0]],
                "weights": [0.8, 0.9],
                "spins": [0.5],
            },
            {
                "mass": 0.8,
                "points": [[0.25, 0.1, 0.0], [0.5, 0.1, 0.0]],
                "weights": [0.7, 1.1],
                "spins": [0.5],
            },
        ],
        "kernels": [
            {
                "kind": "separable",
                "created": [0, 1],
                "nus": [0.6, 0.5],
                "lam": 2.5,
            }
        ],
        "coupling": 0.6,
        "solver": {"trials": 200},
        "mass_grid": [
            {"species": 1, "values": [0.5, 0.2]},
            {"species": 0, "values": [0.4, 0.1]},
        ],
        "infrared": {"slice_species": 1, "r": 1.9},
    }


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


# ---------------------------------------------------------------------------
# config module
# ---------------------------------------------------------------------------

def test_normalize_fills_defaults():
    cfg = normalize_config({"species": [{"mass": 1.0}], "kernels": []})
    assert cfg["coupling"] == 1.0
    assert cfg["exponents"]["margin"] == 0.05
    assert cfg["exponents"]["exempt_species"] == 0
    assert cfg["solver"]["dense_cap"] == 2048
    assert cfg["truncation"] is None


def test_normalize_rejects_missing_sections():
    with pytest.raises(ValueError, match="at least one species"):
        normalize_config({"kernels": []})
    with pytest.raises(ValueError, match="kernels"):
        normalize_config({"species": [{"mass": 1.0}]})


def test_digest_is_stable_and_sensitive():
    cfg = normalize_config(toy_config())
    again = normalize_config(toy_config())
    assert config_digest(cfg) == config_digest(again)
    assert len(config_digest(cfg)) == 16
    bumped = dict(cfg)
    bumped["coupling"] = 0.5
    assert config_digest(bumped) != config_digest(cfg)


def test_build_species_from_grid_entry():
    entry = {
        "mass": 0.9,
        "grid": {"extent": 1.0, "shape": [3, 1, 2], "offsets": [0.0, 0.2, 0.0]},
        "spins": [0.5],
        "chains": [[0, 2, 4]],
    }
    species = build_species(entry)
    assert species.points.shape == (6, 3)
    assert species.chains == ((0, 2, 4),)
    assert np.all(species.weights > 0)


def test_kernel_spec_kinds_and_default_annihilated():
    sig, spec = build_kernel_spec({"kind": "constant", "created": [0, 2]}, 3)
    assert sig.created == (0, 2)
    assert sig.annihilated == (1,)
    assert spec.kind == "constant"
    _, spec = build_kernel_spec({"kind": "gaussian", "alpha": 0.3, "created": [0]}, 2)
    assert spec.alpha == 0.3
    _, spec = build_kernel_spec(
        {"kind": "power", "nus": [0.5, 0.6], "lam": 2.0, "created": [0]}, 2
    )
    assert spec.nus == (0.5, 0.6)
    _, spec = build_kernel_spec(
        {"kind": "separable", "nus": [0.5, 0.6], "lam": 2.0, "created": [0]}, 2
    )
    assert spec.conservation_signs == (1, -1)
    with pytest.raises(ValueError, match="unknown kernel kind"):
        build_kernel_spec({"kind": "cubic"}, 2)


def test_mass_grid_entries_single_and_multi():
    cfg = {"mass_grid": {"species": 0, "values": [1.0, 0.5]}}
    assert mass_grid_entries(cfg) == [(0, [1.0, 0.5])]
    cfg = {
        "mass_grid": [
            {"species": 1, "values": [0.5, 0.2]},
            {"species": 0, "start": 1.0, "stop": 0.001, "count": 6},
        ]
    }
    pairs = mass_grid_entries(cfg)
    assert pairs[0] == (1, [0.5, 0.2])
    species, values = pairs[1]
    assert species == 0
    assert len(values) == 6
    assert np.allclose(values, np.geomspace(1.0, 0.001, 6))


def test_mass_grid_entries_rejections():
    with pytest.raises(ValueError, match="no mass_grid"):
        mass_grid_entries({})
    with pytest.raises(ValueError, match="twice"):
        mass_grid_entries(
            {"mass_grid": [{"species": 0, "values": [1.0, 0.5]},
                           {"species": 0, "values": [0.4, 0.2]}]}
        )
    with pytest.raises(ValueError, match="strictly decreasing"):
        mass_grid_entries({"mass_grid": {"species": 0, "values": [0.5, 1.0]}})
    with pytest.raises(ValueError, match="positive stop"):
        mass_grid_entries({"mass_grid": {"species": 0, "start": 0.5, "stop": 1.0, "count": 4}})


def test_build_bundle_toy():
    bundle = build_bundle(normalize_config(toy_config()))
    assert bundle.basis.dimension == 4
    assert bundle.coupling == 1.0
    assert [t.signature.label() for t in bundle.tensors] == ["c01a-"]


def test_to_jsonable_handles_numpy():
    payload = {
        "arr": np.arange(3.0),
        "scalar": np.float64(1.5),
        "z": 1.0 + 2.0j,
        "nested": [np.int64(4)],
    }
    out = to_jsonable(payload)
    json.dumps(out)
    assert out["arr"] == [0.0, 1.0, 2.0]
    assert out["z"] == {"re": 1.0, "im": 2.0}


# ---------------------------------------------------------------------------
# command line, driven through main()
# ---------------------------------------------------------------------------

def test_cli_build_writes_manifest(tmp_path):
    cfg_path = write_config(tmp_path, toy_config())
    out = tmp_path / "reports"
    assert main(["--report-dir", str(out), "build", "--config", cfg_path]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["dimension"] == 4
    assert manifest["total_modes"] == 2
    assert manifest["terms"] == ["c01a-"]
    assert manifest["config_digest"] == config_digest(load_config(cfg_path))


def test_cli_build_exports_operators(tmp_path):
    cfg = toy_config()
    cfg["output"] = {"export_operators": True}
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "reports"
    assert main(["--report-dir", str(out), "build", "--config", cfg_path]) == 0
    h = load_triplets(str(out / "hamiltonian.txt"))
    assert h.shape == (4, 4)
    assert load_triplets(str(out / "interaction.txt")).nnz == 2


def test_cli_rejects_malformed_config(tmp_path, capsys):
    cfg_path = write_config(tmp_path, {"species": [{"mass": 1.0}]})
    out = tmp_path / "reports"
    assert main(["--report-dir", str(out), "build", "--config", cfg_path]) == 2
    assert "error:" in capsys.readouterr().err
    missing = str(tmp_path / "nope.json")
    assert main(["--report-dir", str(out), "build", "--config", missing]) == 2


def test_cli_groundstate_outputs(tmp_path):
    cfg_path = write_config(tmp_path, toy_config())
    out = tmp_path / "reports"
    assert main(["--report-dir", str(out), "groundstate", "--config", cfg_path]) == 0
    payload = json.loads((out / "groundstate.json").read_text())
    assert abs(payload["energy"] - TOY_ENERGY) <= 1e-10
    assert payload["residual"] <= 1e-10
    lines = (out / "spectrum.csv").read_text().strip().splitlines()
    assert lines[0] == "index,energy"
    energies = [float(line.split(",")[1]) for line in lines[1:]]
    assert abs(energies[0] - TOY_ENERGY) <= 1e-10
    assert energies == sorted(energies)
    obs_lines = (out / "observables.csv").read_text().strip().splitlines()
    assert obs_lines[0] == "species,mode,amplitude"
    assert len(obs_lines) == 3


def test_cli_verify_exact_suite(tmp_path):
    cfg_path = write_config(tmp_path, toy_config())
    out = tmp_path / "reports"
    code = main(
        ["--report-dir", str(out), "verify", "--config", cfg_path, "--suite", "exact"]
    )
    assert code == 0
    payload = json.loads((out / "verify_exact.json").read_text())
    assert payload["failures"] == 0
    names = [r["name"] for r in payload["reports"]["exact"]]
    assert names == ["car_relations", "smeared_norms", "pull_through", "hermiticity"]
    assert all(r["passed"] for r in payload["reports"]["exact"])


def test_cli_verify_all_suites_on_sweep_instance(tmp_path):
    cfg_path = write_config(tmp_path, sweep_config())
    out = tmp_path / "reports"
    code = main(["--report-dir", str(out), "verify", "--config", cfg_path])
    assert code == 0
    payload = json.loads((out / "verify_all.json").read_text())
    assert payload["failures"] == 0
    assert set(payload["reports"]) == {
        "exact", "bounds", "interpolation", "number", "infrared"
    }
    bound_names = [r["name"] for r in payload["reports"]["bounds"]]
    assert bound_names == [
        "form_bound",
        "refined_form_bound",
        "hermite_bound",
        "operator_bound",
        "relative_bound_zero",
    ]
    assert [r["name"] for r in payload["reports"]["number"]] == ["number_estimate"]
    ir = payload["reports"]["infrared"][0]
    assert ir["passed"]
    assert ir["details"]["verdict"] == "finite"


def test_cli_verify_infrared_annotation_controls_exit(tmp_path):
    cfg = sweep_config()
    cfg["kernels"][0]["nus"] = [0.6, 0.0]
    cfg_path = write_config(tmp_path, cfg, "divergent.json")
    out = tmp_path / "r1"
    code = main(
        ["--report-dir", str(out), "verify", "--config", cfg_path, "--suite", "infrared"]
    )
    assert code == 1
    payload = json.loads((out / "verify_infrared.json").read_text())
    assert payload["reports"]["infrared"][0]["details"]["verdict"] == "divergent"

    cfg["infrared"]["expect"] = "divergent"
    cfg_path = write_config(tmp_path, cfg, "annotated.json")
    out = tmp_path / "r2"
    code = main(
        ["--report-dir", str(out), "verify", "--config", cfg_path, "--suite", "infrared"]
    )
    assert code == 0
    payload = json.loads((out / "verify_infrared.json").read_text())
    report = payload["reports"]["infrared"][0]
    assert report["passed"]
    assert report["details"]["annotated_expected"]


def test_cli_masslimit_runs_both_targets(tmp_path):
    cfg_path = write_config(tmp_path, sweep_config())
    out = tmp_path / "reports"
    code = main(["--report-dir", str(out), "masslimit", "--config", cfg_path])
    assert code == 0
    payload = json.loads((out / "masslimit.json").read_text())
    assert payload["passed"]
    assert [s["species"] for s in payload["sweeps"]] == [1, 0]
    for sweep in payload["sweeps"]:
        assert sweep["passed"]
        assert sweep["monotonicity_violation"] <= 1e-9
        assert sweep["sandwich_violation"] <= 1e-9
        # energies decrease with the mass and the limit sits below them all
        assert all(np.diff(sweep["energies"]) <= 1e-12)
        assert sweep["limit_energy"] <= sweep["energies"][-1] + 1e-12
    lines = (out / "masslimit.csv").read_text().strip().splitlines()
    assert lines[0] == "target_species,mass,energy,cross_energy,overlap_next"
    assert len(lines) == 1 + 2 * (2 + 1)
    limit_rows = [line for line in lines[1:] if line.split(",")[1] == "0.0"]
    assert len(limit_rows) == 2


def test_cli_fermi_demo_verdicts(tmp_path):
    out = tmp_path / "reports"
    assert main(["--report-dir", str(out), "fermi-demo"]) == 0
    payload = json.loads((out / "fermi_demo.json").read_text())
    assert payload["exponents"] == {"0": "0", "1": "13/60", "2": "13/60", "3": "49/180"}
    physical = payload["variants"]["physical"]
    regular = payload["variants"]["regular"]
    assert physical["infrared"]["verdict"] == "divergent"
    assert physical["power_counting_oracle"] == "divergent"
    assert regular["infrared"]["verdict"] == "finite"
    assert regular["power_counting_oracle"] == "finite"
    assert physical["verdict_as_expected"] and regular["verdict_as_expected"]
    assert regular["slice_profiles_finite"]
    assert payload["fock_demo"]["dimension"] == 256


def test_cli_outputs_are_deterministic(tmp_path):
    cfg_path = write_config(tmp_path, sweep_config())
    first = tmp_path / "a"
    second = tmp_path / "b"
    for out in (first, second):
        assert main(
            ["--report-dir", str(out), "--seed", "11", "masslimit", "--config", cfg_path]
        ) == 0
        assert main(
            ["--report-dir", str(out), "--seed", "11", "groundstate", "--config", cfg_path]
        ) == 0
    for name in ("masslimit.json", "masslimit.csv", "groundstate.json",
                 "spectrum.csv", "observables.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
