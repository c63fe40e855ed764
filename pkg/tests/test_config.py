from pathlib import Path

import pytest
import yaml

from nspot.config import ConfigError, RunConfig, load_config

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example.yaml"


def test_defaults_round_trip():
    cfg = RunConfig()
    assert RunConfig.from_yaml(cfg.to_yaml()) == cfg


def test_modified_round_trip():
    text = """
target_pollutant: o3
threshold: 42.0
feature_spec: {fourier_orders: {daily: 2}, lag_count: 2}
chain: {n_iterations: 1000, burn_in: 100, thin: 3, proposal_scales: [0.1, 0.2], variable_selection: true}
return_levels: {horizons_years: [1, 2], p: [0.001]}
scenario: {reduction: 0.5, lag_resampling: false}
comparison: {method: bridge}
"""
    cfg = RunConfig.from_yaml(text)
    assert cfg.threshold == 42.0 and cfg.threshold_quantile is None
    assert cfg.feature_spec.fourier_orders == (2, 2, 2)
    assert RunConfig.from_yaml(cfg.to_yaml()) == cfg


def test_example_config_loads():
    cfg = load_config(EXAMPLE)
    assert cfg.feature_spec.m == 52
    assert cfg.data_file == EXAMPLE.parent / "output" / "synthetic.csv"
    # every key in the example is a real setting with the default value, except the data path
    assert {k: v for k, v in cfg.to_dict().items() if k != "data_path"} == \
        {k: v for k, v in RunConfig().to_dict().items() if k != "data_path"}


@pytest.mark.parametrize("text, fragment", [
    ("colour: red", "unknown top-level keys"),
    ("chain: {iterations: 5}", "unknown chain keys"),
    ("target_pollutant: pm10", "target_pollutant"),
    ("threshold: 5\nthreshold_quantile: 0.9", "exactly one"),
    ("threshold_quantile: 1.5", "threshold_quantile"),
    ("feature_spec: {declared_m: 12}", "covariate count mismatch"),
    ("- a\n- b", "mapping"),
    ("chain: [", "invalid YAML"),
    ("return_levels: {horizons_years: [-1]}", "horizon"),
])
def test_invalid_configs(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        RunConfig.from_yaml(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "nope.yaml")


def test_to_dict_is_plain_yaml():
    dumped = yaml.safe_dump(RunConfig().to_dict())
    assert "!!python" not in dumped
