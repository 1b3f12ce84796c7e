"""Tests for strict run-config parsing: missing fields are named, unknown
keys are rejected, types are checked, and resolved configs round-trip."""

import pytest
import yaml

from gpsdrive.config import (
    ConfigError,
    load_config,
    parse_config,
    resolved_dict,
    write_resolved_config,
)


def minimal():
    return {
        "algorithm": "gps",
        "seed": 0,
        "output_dir": "runs/x",
        "scenario": {"kind": "straight"},
    }


def test_minimal_config_parses_with_defaults():
    cfg = parse_config(minimal())
    assert cfg.algorithm == "gps"
    assert cfg.seed == 0
    assert cfg.scenario.kind == "straight"
    assert cfg.scenario.v_ref == 5.0
    assert cfg.scenario.horizon == 50
    assert cfg.gps.iterations == 10
    assert cfg.gps.prior_strength == (20.0, 50.0)
    assert cfg.gps.seed == 0
    assert cfg.cem.seed == 0
    assert cfg.mixed is False


def test_missing_fields_are_named():
    raw = minimal()
    del raw["algorithm"]
    with pytest.raises(ConfigError, match="algorithm"):
        parse_config(raw)
    raw = minimal()
    del raw["seed"]
    with pytest.raises(ConfigError, match="seed"):
        parse_config(raw)
    raw = minimal()
    del raw["output_dir"]
    with pytest.raises(ConfigError, match="output_dir"):
        parse_config(raw)
    raw = minimal()
    del raw["scenario"]
    with pytest.raises(ConfigError, match="scenario"):
        parse_config(raw)
    raw = minimal()
    del raw["scenario"]["kind"]
    with pytest.raises(ConfigError, match="scenario.kind"):
        parse_config(raw)


def test_default_output_fills_missing_output_dir():
    raw = minimal()
    del raw["output_dir"]
    cfg = parse_config(raw, default_output="runs/auto")
    assert str(cfg.output_dir) == "runs/auto"


def test_unknown_keys_are_rejected_with_path():
    raw = minimal()
    raw["iterations"] = 5
    with pytest.raises(ConfigError, match="unknown field: iterations"):
        parse_config(raw)
    raw = minimal()
    raw["scenario"]["speed"] = 3
    with pytest.raises(ConfigError, match="unknown field: scenario.speed"):
        parse_config(raw)
    raw = minimal()
    raw["gps"] = {"iteraitons": 5}
    with pytest.raises(ConfigError, match="unknown field: gps.iteraitons"):
        parse_config(raw)
    raw = minimal()
    raw["cost"] = {"alpha_lateral": 1.0}
    with pytest.raises(ConfigError, match="unknown field: cost.alpha_lateral"):
        parse_config(raw)
    raw = minimal()
    raw["gps"] = {"pd": {"kp": 1.0}}
    with pytest.raises(ConfigError, match="unknown field: gps.pd.kp"):
        parse_config(raw)


def test_type_errors_are_named():
    raw = minimal()
    raw["seed"] = "zero"
    with pytest.raises(ConfigError, match="seed"):
        parse_config(raw)
    raw = minimal()
    raw["scenario"]["horizon"] = 2.5
    with pytest.raises(ConfigError, match="scenario.horizon"):
        parse_config(raw)
    raw = minimal()
    raw["gps"] = {"em_tol": "tiny"}
    with pytest.raises(ConfigError, match="gps.em_tol"):
        parse_config(raw)
    raw = minimal()
    raw["mixed"] = "yes"
    with pytest.raises(ConfigError, match="mixed"):
        parse_config(raw)


def test_bad_algorithm_and_kind():
    raw = minimal()
    raw["algorithm"] = "ppo"
    with pytest.raises(ConfigError, match="algorithm"):
        parse_config(raw)
    raw = minimal()
    raw["scenario"]["kind"] = "figure8"
    with pytest.raises(ConfigError, match="scenario.kind"):
        parse_config(raw)


def test_prior_strength_must_be_pair():
    raw = minimal()
    raw["gps"] = {"prior_strength": [1.0]}
    with pytest.raises(ConfigError, match="prior_strength"):
        parse_config(raw)
    raw["gps"] = {"prior_strength": [1.0, 2.0]}
    assert parse_config(raw).gps.prior_strength == (1.0, 2.0)


def test_obstacle_section():
    raw = minimal()
    raw["scenario"]["obstacle"] = {"gap": 12, "speed": 2.5}
    cfg = parse_config(raw)
    assert cfg.scenario.obstacle.gap == 12.0
    assert cfg.scenario.obstacle.speed == 2.5
    assert cfg.scenario.obs_dim == 5
    raw["scenario"]["obstacle"] = {"distance": 12}
    with pytest.raises(ConfigError, match="scenario.obstacle.distance"):
        parse_config(raw)


def test_mixed_with_obstacle_is_rejected():
    raw = minimal()
    raw["mixed"] = True
    raw["scenario"]["obstacle"] = {"gap": 15}
    with pytest.raises(ConfigError, match="mixed"):
        parse_config(raw)


def test_config_root_must_be_mapping():
    with pytest.raises(ConfigError, match="mapping"):
        parse_config(["algorithm", "gps"])


def test_invalid_yaml_raises_config_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("algorithm: [unclosed\n")
    with pytest.raises(ConfigError, match="could not parse"):
        load_config(p)


def test_resolved_config_round_trips(tmp_path):
    raw = minimal()
    raw["gps"] = {"iterations": 7, "epsilon": 0.5}
    raw["cost"] = {"alpha_l": 2.0}
    cfg = parse_config(raw)
    out = tmp_path / "resolved.yaml"
    write_resolved_config(cfg, out)
    reparsed = parse_config(yaml.safe_load(out.read_text()))
    assert resolved_dict(reparsed) == resolved_dict(cfg)
    assert reparsed.gps.iterations == 7
    assert reparsed.gps.dual.epsilon == 0.5
    assert reparsed.cost.alpha_l == 2.0


def test_cem_section_parses():
    raw = minimal()
    raw["algorithm"] = "cem"
    raw["cem"] = {"iterations": 5, "population": 6, "elite_count": 2,
                  "smoothing": 0.4, "sigma_init": 0.2,
                  "pd": {"action_std": 0.1}}
    cfg = parse_config(raw)
    assert cfg.cem.iterations == 5
    assert cfg.cem.population == 6
    assert cfg.cem.elite_count == 2
    assert cfg.cem.pd.action_std == 0.1
