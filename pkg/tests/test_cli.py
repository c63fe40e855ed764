import csv
import json
import subprocess
import sys

import pytest
import yaml

from acceptance_cases import TINY_CONFIG
from nspot.cli import main
from nspot.sampler import PosteriorSampleSet




@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    text = yaml.safe_load(TINY_CONFIG)
    text["chain"]["variable_selection"] = True
    text["return_levels"]["horizons_years"] = [0.05, 0.1]
    text["scenario"] = {"horizons_years": [0.05], "n_replicates": 3}
    cfg = root / "config.yaml"
    cfg.write_text(yaml.safe_dump(text))
    for args in (["synth"], ["fit", "--model", "model1"], ["fit", "--model", "model2"]):
        assert main(["--config", str(cfg), *args]) == 0
    return cfg


def read_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


def test_posterior_has_expected_rows(workspace):
    out = workspace.parent / "out"
    samples = PosteriorSampleSet.read(out / "posterior_model2.csv", out / "posterior_model2.json")
    assert samples.n_draws == (6000 - 2000) // 20
    assert samples.indicators is not None
    with open(out / "coefficients_model2.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == len(samples.coefficient_names)


@pytest.mark.parametrize("command", ["diagnose", "select", "return-levels", "scenario", "cross-validate"])
def test_model_commands(workspace, command):
    assert main(["--config", str(workspace), command, "--model", "model2"]) == 0


def test_diagnose_output(workspace):
    assert main(["--config", str(workspace), "diagnose", "--model", "model1"]) == 0
    report = json.loads((workspace.parent / "out" / "diagnostics_model1.json").read_text())
    assert 0.0 <= report["ks_p_value"] <= 1.0
    assert report["n_exceedances"] > 0


def test_return_level_table(workspace):
    assert main(["--config", str(workspace), "return-levels", "--model", "model2"]) == 0
    report = json.loads((workspace.parent / "out" / "return_levels_model2.json").read_text())
    rows = report["marginal"]
    assert [r["horizon_years"] for r in rows] == [0.05, 0.1]
    for r in rows:
        assert r["lower"] <= r["level"] <= r["upper"]
    assert rows[1]["level"] >= rows[0]["level"]


def test_compare(workspace):
    assert main(["--config", str(workspace), "compare"]) == 0
    report = json.loads((workspace.parent / "out" / "compare.json").read_text())
    assert set(report["dic"]) == {"model1", "model2"}
    assert report["bayes_factor"]["favours"] in ("model1", "model2", "neither")


def test_compare_with_missing_posterior(workspace, tmp_path, capsys):
    assert main(["--config", str(workspace), "--output", str(tmp_path), "compare"]) == 1
    err = read_error(capsys)
    assert err["error"] == "MissingArtifactError"
    assert "posterior_model1.csv" in err["message"]


def test_missing_data_file(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("data_path: nowhere/data.csv\nthreshold: 1.0\n")
    assert main(["--config", str(cfg), "fit"]) == 1
    err = read_error(capsys)
    assert err["error"] == "FileNotFoundError"
    assert str(tmp_path / "nowhere" / "data.csv") in err["message"]


def test_missing_config_flag(capsys):
    assert main(["fit"]) == 1
    assert "--config is required" in read_error(capsys)["message"]


def test_seed_override_changes_posterior(workspace, tmp_path):
    out = tmp_path / "seeded"
    assert main(["--config", str(workspace), "--seed", "99", "--output", str(out), "fit", "--model", "model1"]) == 0
    a = (workspace.parent / "out" / "posterior_model1.csv").read_bytes()
    b = (out / "posterior_model1.csv").read_bytes()
    assert a != b
    assert json.loads((out / "posterior_model1.json").read_text())["seed"] == 99


def test_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "nspot.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for command in ("synth", "fit", "diagnose", "select", "return-levels", "compare", "scenario",
                    "cross-validate"):
        assert command in res.stdout
