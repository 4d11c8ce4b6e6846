import json

import pytest

from nnpde.config import ExperimentConfig, GridConfig, config_from_dict, json_schema, load_config, parse_grid
from nnpde.net import ConfigError


def test_defaults_match_calibration_setup():
    cfg = ExperimentConfig()
    assert cfg.scenario == "heat" and cfg.beta == 2 / 3 and cfg.activation == "tanh"
    assert (cfg.grid.t_count, cfg.grid.x_count, cfg.grid.y_count) == (33, 17, 17)
    assert cfg.schedule.factor == 0.95 and cfg.schedule.patience == 100
    assert cfg.zclip.alpha == 0.98 and cfg.zclip.z_threshold == 0.4
    assert cfg.optimizer.beta1 == 0.9 and cfg.optimizer.beta2 == 0.999


def test_nested_round_trip(tmp_path):
    cfg = config_from_dict({"scenario": "allen_cahn", "grid": {"t_count": 9}, "zclip": {"enabled": False},
                            "limit": {"grid": {"x_count": 5}}})
    assert cfg.grid.t_count == 9 and cfg.grid.x_count == 17
    assert cfg.limit.grid.x_count == 5 and not cfg.zclip.enabled
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_json()))
    assert load_config(path) == cfg


@pytest.mark.parametrize("data", [{"bogus": 1}, {"grid": {"z_count": 3}}, {"limit": {"grid": {"q": 1}}},
                                  {"scenario": "wave"}, {"beta": 0.3}, {"grid": {"t_count": 2}}, {"grid": 5}])
def test_rejects_bad_config(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_unreadable_file(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.json")


def test_parse_grid():
    assert parse_grid("9,5,7") == GridConfig(9, 5, 7)
    with pytest.raises(ConfigError):
        parse_grid("9,5")


def test_schema_lists_every_field():
    schema = json_schema()
    props = schema["properties"]
    assert set(props) == set(ExperimentConfig().to_json())
    assert props["grid"]["additionalProperties"] is False
    assert props["n"] == {"type": "integer", "default": 50}
