import csv
import json

import pytest

from antipt_spdc.cli import build_parser, main
from antipt_spdc.observables import CorrelationRecord
from antipt_spdc.validate import synthetic_calibration
from antipt_spdc.version import __version__


def _read_csv(path):
    lines = path.read_text().splitlines()
    body = [line for line in lines if not line.startswith("#")]
    footer = dict(line[2:].split(": ", 1) for line in lines if line.startswith("# "))
    return list(csv.DictReader(body)), footer


def test_no_command_prints_help(capsys):
    assert main([]) == 0
    assert "usage" in capsys.readouterr().out


def test_version_flag(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--version"])
    assert __version__ in capsys.readouterr().out


def test_design_command(tmp_path, capsys):
    assert main(["design", "--output-dir", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "design.json").read_text())
    assert payload["command"] == "design"
    assert payload["outputs"]["g_eps"]["m^-1"] == pytest.approx(6.93, rel=1e-2)
    assert payload["outputs"]["g_exp"]["m^-1 J^-1/2"] == pytest.approx(4.86e8, rel=1e-2)
    assert len(payload["config_hash"]) == 64
    assert "qpm period" in capsys.readouterr().out


def test_fit_command(tmp_path):
    samples = tmp_path / "calibration.csv"
    rows = ["P_heater_mW,P_a_W,P_b_W"] + [",".join(repr(float(v)) for v in row) for row in synthetic_calibration()]
    samples.write_text("\n".join(rows) + "\n")
    assert main(["fit", str(samples), "--output-dir", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())["fit"]
    assert fit["b"] == pytest.approx(0.037, rel=1e-6)
    assert fit["theta0"] == pytest.approx(0.56, rel=1e-6)


def test_fit_needs_samples(tmp_path, capsys):
    assert main(["fit", "--output-dir", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("Error:")


def test_evolve_gaussian(tmp_path):
    argv = ["evolve", "--engine", "gaussian", "--samples", "5", "--theta", "pi", "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    rows, footer = _read_csv(tmp_path / "evolve_gaussian.csv")
    assert len(rows) == 5
    assert list(rows[0]) == CorrelationRecord.columns()
    assert float(rows[0]["z_m"]) == 0.0
    assert float(rows[-1]["z_m"]) == pytest.approx(4e-3)
    assert footer["version"] == __version__
    sidecar = json.loads((tmp_path / "evolve_gaussian.json").read_text())
    assert sidecar["config_hash"] == footer["config_hash"]


def test_evolve_rejects_theta_grid(tmp_path):
    assert main(["evolve", "--theta-grid", "0,pi", "--output-dir", str(tmp_path)]) == 1


def test_sweep_with_comparison(tmp_path):
    argv = [
        "sweep", "--engine", "gaussian", "--theta-grid", "0:2pi:5", "--per-mode-cap", "2", "--total-cap", "2",
        "--samples", "2", "--compare-engine", "me", "--output-dir", str(tmp_path),
    ]
    assert main(argv) == 0
    rows, footer = _read_csv(tmp_path / "sweep_gaussian.csv")
    assert len(rows) == 5
    assert all(row["error"] == "" for row in rows)
    assert footer["failed_points"] == "0"
    assert 0.0 < float(footer["G4_visibility"]) <= 1.0
    assert "max_G4_deviation_vs_me" in footer


def test_sweep_reports_failed_points(tmp_path):
    argv = [
        "sweep", "--engine", "nhh", "--scheme", "three_mode", "--kappa", "7662 m^-1", "--gamma-c", "81300 m^-1",
        "--theta-grid", "0,pi", "--per-mode-cap", "1", "--total-cap", "1", "--samples", "2",
        "--output-dir", str(tmp_path),
    ]
    assert main(argv) == 0
    rows, footer = _read_csv(tmp_path / "sweep_nhh.csv")
    assert footer["failed_points"] == "2"
    assert all("three-mode" in row["error"] for row in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["evolve", "--scheme", "pt"],
        ["evolve", "--samples", "1"],
        ["sweep", "--workers", "0"],
    ],
)
def test_invalid_arguments_exit_with_one(tmp_path, argv, capsys):
    assert main(argv + ["--output-dir", str(tmp_path)]) == 1
    assert "Error:" in capsys.readouterr().err


def test_bad_quantity_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["evolve", "--gamma", "722", "--output-dir", str(tmp_path)])
    assert info.value.code == 2


def test_validate_subset(tmp_path, capsys):
    assert main(["validate", "--only", "A10", "A11", "--cap", "2", "--output-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validate.json").read_text())
    assert [result["name"] for result in report["results"]] == ["A10", "A11"]
    assert report["passed"] is True
    assert "A10  PASS" in capsys.readouterr().out


def test_config_file_and_overrides(tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text("run:\n  engine: gaussian\npropagation:\n  samples: 3\n")
    assert main(["evolve", "--config", str(config), "--samples", "4", "--output-dir", str(tmp_path)]) == 0
    rows, _ = _read_csv(tmp_path / "evolve_gaussian.csv")
    assert len(rows) == 4
