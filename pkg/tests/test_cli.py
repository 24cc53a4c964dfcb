"""End-to-end tests of the ``qcorr`` command line (run in-process via ``main``)."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from qcorr import cli, correlator, scenarios
from qcorr.core import Shot, encode_shots, read_events


def _write_config(tmp_path: Path, scenario: str, params: dict, name: str = "cfg.json", **top) -> Path:
    doc = {"schema_version": 1, "scenario": scenario, "seed": 7, "output_dir": str(tmp_path / "out"), "params": params, **top}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


SMALL_LHV = {"n_shots": 2000}
SMALL_FLAT = {"n_shots": 300, "mean_atoms": 20.0}


def _tree(root: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


def test_run_writes_outputs_and_manifest(tmp_path, capsys):
    cfg = _write_config(tmp_path, "bell-lhv", SMALL_LHV)
    assert cli.main(["run", str(cfg)]) == cli.EXIT_OK
    files = _tree(tmp_path / "out")
    assert set(files) == {"lhv.json", "manifest.json"}
    man = json.loads(files["manifest.json"])
    assert man["scenario"] == "bell-lhv"
    assert man["seed"] == 7
    assert man["outputs"]["lhv.json"] == hashlib.sha256(files["lhv.json"]).hexdigest()
    canon = json.dumps(man["config"], sort_keys=True, separators=(",", ":")).encode()
    assert man["config_sha256"] == hashlib.sha256(canon).hexdigest()
    assert set(man["versions"]) >= {"qcorr", "numpy", "scipy", "numba", "python"}
    # no staging directories left behind
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json", "out"]


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write_config(tmp_path, "hbt-bec-flat", SMALL_FLAT)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_seed_override_changes_outputs(tmp_path):
    cfg = _write_config(tmp_path, "hbt-bec-flat", SMALL_FLAT)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "8"]) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a["events.csv"] != b["events.csv"]
    assert json.loads(b["manifest.json"])["seed"] == 8


def test_check_mode_pass_and_fail(tmp_path, capsys):
    cfg = _write_config(tmp_path, "bell-lhv", SMALL_LHV)
    assert cli.main(["run", str(cfg), "--check"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "PASS enumeration" in out
    checks = json.loads((tmp_path / "out" / "checks.json").read_text())
    assert all(c["passed"] for c in checks)

    # 20 shots of a flat cloud cannot hold every bin within 0.02 of 1
    cfg = _write_config(tmp_path, "hbt-bec-flat", {"n_shots": 20, "mean_atoms": 10.0}, name="tiny.json")
    assert cli.main(["run", str(cfg), "--check", "--out", str(tmp_path / "tiny")]) == cli.EXIT_CHECK
    assert "FAIL flat" in capsys.readouterr().out


@pytest.mark.parametrize(
    "doc",
    [
        {"schema_version": 1, "scenario": "bell-lhv", "params": {}, "colour": "red"},
        {"schema_version": 1, "scenario": "bell-lhv", "params": {"n_shot": 10}},
        {"schema_version": 2, "scenario": "bell-lhv", "params": {}},
        {"schema_version": 1, "scenario": "no-such-thing", "params": {}},
        {"schema_version": 1, "scenario": "bell-lhv", "params": {"n_shots": "many"}},
        {"schema_version": 1, "scenario": "bell-lhv", "params": {"n_shots": 1.5}},
        {"schema_version": 1, "scenario": "bell-lhv", "seed": -1, "params": {}},
        [1, 2, 3],
    ],
)
def test_bad_configs_exit_2(tmp_path, doc, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "out")]) == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_and_malformed_config(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", str(bad)]) == cli.EXIT_CONFIG


def test_physically_invalid_params_exit_2(tmp_path):
    # far too dense for a valid fermionic kernel
    cfg = _write_config(tmp_path, "hbt-fermion-cloud", {"mean_atoms": 500.0, "n_shots": 10, "extent_mm": [0.6, 0.6, 0.02]})
    assert cli.main(["run", str(cfg)]) == cli.EXIT_CONFIG
    assert not (tmp_path / "out").exists()


def test_runtime_error_exit_3_leaves_no_partial_output(tmp_path, monkeypatch, capsys):
    def boom(p, rng):
        raise RuntimeError("simulated failure")

    monkeypatch.setitem(scenarios.SCENARIOS, "bell-lhv", scenarios.Scenario(scenarios.LhvParams, boom))
    cfg = _write_config(tmp_path, "bell-lhv", {})
    assert cli.main(["run", str(cfg)]) == cli.EXIT_RUNTIME
    assert "simulated failure" in capsys.readouterr().err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json"]


def test_configs_directory_parses():
    root = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(root.glob("*.json"))
    assert {json.loads(p.read_text())["scenario"] for p in paths} == set(scenarios.SCENARIOS)
    for p in paths:
        scenarios.parse_config(json.loads(p.read_text()))


# --- analyze ---------------------------------------------------------------------------------


def _events_file(tmp_path: Path, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    counts = rng.poisson(20, 200)
    shots = [Shot(i, np.c_[rng.uniform(-1, 1, (n, 2)), rng.uniform(0, 5, n)]) for i, n in enumerate(counts)]
    path = tmp_path / "ev.csv"
    path.write_bytes(encode_shots(shots))
    return path


def test_analyze_writes_curve_and_verdict(tmp_path, capsys):
    ev = _events_file(tmp_path)
    rc = cli.main(["analyze", str(ev), "--axis", "r", "--bins", "0:1:5", "--gate", "dt=10", "--out", str(tmp_path / "res")])
    assert rc == 0
    curve = (tmp_path / "res" / "ev_g2.csv").read_text().splitlines()
    assert len(curve) == 1 + 5
    verdict = json.loads((tmp_path / "res" / "ev_verdict.json").read_text())
    assert verdict["verdict"] in {correlator.CLASSICAL, correlator.NONCLASSICAL}
    assert len(read_events(ev)) == 200


def test_analyze_explicit_edges_and_singles(tmp_path):
    ev = _events_file(tmp_path)
    rc = cli.main(["analyze", str(ev), "--axis", "dx", "--bins", "0,0.1,0.25,0.5", "--norm", "singles", "--out", str(tmp_path)])
    assert rc == 0
    assert len((tmp_path / "ev_g2.csv").read_text().splitlines()) == 1 + 3


def test_analyze_reports_bad_row_with_line_number(tmp_path, capsys):
    ev = tmp_path / "ev.csv"
    ev.write_text("shot_id,x_mm,y_mm,t_ns\n0,0.1,0.2,0.3\n0,abc,0.2,0.3\n")
    assert cli.main(["analyze", str(ev), "--axis", "r", "--bins", "0:1:4"]) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_analyze_missing_file(tmp_path):
    assert cli.main(["analyze", str(tmp_path / "none.csv"), "--axis", "r", "--bins", "0:1:4"]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("bins", ["0:1", "0:1:0", "a,b", ""])
def test_analyze_bad_bins_rejected_by_parser(tmp_path, bins):
    with pytest.raises(SystemExit) as exc:
        cli.main(["analyze", "x.csv", "--axis", "r", "--bins", bins])
    assert exc.value.code == 2


def test_analyze_bad_gate(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["analyze", "x.csv", "--axis", "r", "--bins", "0:1:4", "--gate", "dt"])
    assert exc.value.code == 2
