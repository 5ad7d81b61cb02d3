import json
import shutil
import subprocess
import sys
from importlib import resources

import pytest

from bimorph_ao import cli


def run(args, capsys):
    code = cli.main(args + ["-q"])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert cli.main(["synth", "--out", str(out), "--export-plant", "-q"]) == 0
    return out


def test_validate_fixtures_passes(tmp_path, capsys):
    code, out, _ = run(["validate-fixtures", "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_OK
    report = json.loads((tmp_path / "fixture_report.json").read_text())
    assert report["ok"] and "anomalous-skip" in out


def _fixture_copy(tmp_path):
    src = resources.files("bimorph_ao").joinpath("data")
    dst = tmp_path / "fixtures"
    dst.mkdir()
    for name in ("table1.json", "table2.json", "table3.json"):
        shutil.copy(str(src / name), dst / name)
    return dst


def test_corrupted_fixture_fails_with_row(tmp_path, capsys):
    d = _fixture_copy(tmp_path)
    doc = json.loads((d / "table3.json").read_text())
    doc["rows"][4][3] *= 1.01
    (d / "table3.json").write_text(json.dumps(doc))
    code, out, _ = run(["validate-fixtures", "--fixtures", str(d), "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_FAIL
    assert "table3 row  5: fail" in out


def test_malformed_fixture_is_config_error(tmp_path, capsys):
    d = _fixture_copy(tmp_path)
    (d / "table2.json").write_text("{not json")
    code, _, err = run(["validate-fixtures", "--fixtures", str(d), "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG
    assert json.loads(err)["error"] == "fixture"


def test_synthesis_outputs(synth_dir):
    report = json.loads((synth_dir / "synthesis_report.json").read_text())
    assert report["certified"] and all(report["conditions"].values())
    assert (synth_dir / "plant.json").exists() and (synth_dir / "controller.json").exists()
    assert json.loads((synth_dir / "config_echo.json").read_text())["version"] == 1


def test_infeasible_cap_exit_code(tmp_path, capsys):
    code, _, err = run(["synth", "--out", str(tmp_path), "--gamma-hi", "0.01",
                        "--gamma-cap", "0.02"], capsys)
    assert code == cli.EXIT_INFEASIBLE
    payload = json.loads(err)
    assert payload["error"] == "infeasible" and payload["details"]["failing"]


def test_exported_plant_is_byte_stable(synth_dir, tmp_path, capsys):
    code, _, _ = run(["synth", "--out", str(tmp_path), "--export-plant"], capsys)
    assert code == 0
    assert (tmp_path / "plant.json").read_bytes() == (synth_dir / "plant.json").read_bytes()


def test_simulation_is_byte_deterministic(synth_dir, tmp_path, capsys):
    ctrl = str(synth_dir / "controller.json")
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        code, _, _ = run(["simulate", "--controller", ctrl, "--seed", "5", "--duration", "0.3",
                          "--out", str(d)], capsys)
        assert code == 0
        outs.append((d / "timeseries.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].startswith(b"t,phi_tur_norm,phi_res_norm,u_norm\n")


def test_montecarlo_summary(synth_dir, tmp_path, capsys):
    code, out, _ = run(["montecarlo", "--controller", str(synth_dir / "controller.json"),
                        "--runs", "3", "--duration", "0.3", "--out", str(tmp_path)], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["runs"] == 3 and summary["seeds"] == [0, 1, 2]
    assert len((tmp_path / "runs.csv").read_text().splitlines()) == 4


def test_no_control_ratio_near_one(tmp_path, capsys):
    code, _, _ = run(["simulate", "--no-control", "--duration", "0.5", "--out", str(tmp_path)], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert not summary["controlled"]
    assert 0.5 < summary["ratio"] < 1.5


def test_missing_controller(tmp_path, capsys):
    code, _, err = run(["simulate", "--controller", str(tmp_path / "none.json"),
                        "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG
    assert json.loads(err)["error"] == "controller"


def test_mismatched_controller(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_basis": 6}))
    code, _, err = run(["simulate", "--config", str(cfg), "--controller",
                        str(synth_dir / "controller.json"), "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG
    assert json.loads(err)["error"] == "dimension"


@pytest.mark.parametrize("doc", [{"dt": -1}, {"unknown_key": 1}, {"version": 9},
                                 {"params": {"nu": 0.9}}, {"burn_in": 5.0}])
def test_config_errors(tmp_path, capsys, doc):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    code, _, err = run(["modes", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_CONFIG
    assert json.loads(err)["exit_code"] == cli.EXIT_CONFIG


def test_modes_and_turbulence_exports(tmp_path, capsys):
    assert run(["modes", "--out", str(tmp_path)], capsys)[0] == 0
    lines = (tmp_path / "modes.csv").read_text().splitlines()
    assert lines[0] == "k,j,lambda,c,a,omega_sq" and len(lines) == 11
    assert run(["turbulence", "--steps", "10", "--out", str(tmp_path)], capsys)[0] == 0
    doc = json.loads((tmp_path / "turbulence.json").read_text())
    assert doc["lyapunov_residual"] <= 1e-10
    assert len((tmp_path / "turbulence_path.csv").read_text().splitlines()) == 12


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "bimorph_ao.cli", "modes", "-q", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "lambda=2.37805" in out.stdout
