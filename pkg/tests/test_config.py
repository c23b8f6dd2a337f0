import json
from fractions import Fraction
from pathlib import Path

import pytest

from app.config import RunConfig, env_settings, load_config
from chains.chain_core import MAX_DIAMETER, lift_chain, strip_chain
from construction.errors import ConfigError
from construction.rotation import RotationVector


def test_defaults():
    config = RunConfig.from_json({})
    assert config.alpha0 == RotationVector(2, 1, 5)
    assert config.N0 == 8
    assert config.eps0 == 0.0625
    assert config.budgets.n_max == 2**14


def test_round_trip_is_lossless():
    doc = {
        "alpha0": ["3/7", "1/3"],
        "N0": 8,
        "eps0": 0.05,
        "stages": 2,
        "budgets": {"n_max": 256, "seconds": 12.5},
        "settings": {"cover_grid": 64},
        "seed": 7,
    }
    config = RunConfig.from_json(doc)
    assert config.alpha0.x == Fraction(3, 7) and config.alpha0.y == Fraction(1, 3)
    assert config.settings.cover_grid == 64
    assert RunConfig.from_json(config.to_json()) == config


@pytest.mark.parametrize(
    "doc,key",
    [
        ({"stages": 0}, "stages"),
        ({"N0": 3}, "N0"),
        ({"eps0": 0.5}, "eps0"),
        ({"N0": 4.5}, "N0"),
        ({"N0": 4, "eps0": 0.01}, "N0"),
        ({"N0": 8, "eps0": 0.1}, "eps0"),
        ({"seed": True}, "seed"),
        ({"colour": "red"}, "colour"),
        ({"budgets": {"n_max": -1}}, "budgets.n_max"),
        ({"settings": {"grids": 4}}, "settings.grids"),
        ({"settings": {"return_ratio": 1.5}}, "settings.return_ratio"),
        ({"alpha0": ["1/0", "1/2"]}, "alpha0"),
        ({"alpha0": "2/5"}, "alpha0"),
    ],
)
def test_invalid_values_name_the_key(doc, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_json(doc)
    assert str(info.value).startswith(key)


def test_with_out_keeps_config_without_override():
    config = RunConfig()
    assert config.with_out(None) is config
    assert config.with_out("runs/a").out == "runs/a"


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"stages": 3}), encoding="utf-8")
    assert load_config(path).stages == 3
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.json")
    path.write_text("[", encoding="utf-8")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(path)


def test_env_settings(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("AKPC_LOG_LEVEL", "debug")
    monkeypatch.setenv("AKPC_OUTPUT_DIR", "elsewhere")
    settings = env_settings()
    assert settings.log_level == "DEBUG"
    assert settings.output_dir == "elsewhere"


def test_default_strip_chain_meets_diameter_bound():
    config = RunConfig()
    chain = strip_chain(0.0, config.eps0, config.N0)
    assert chain.max_diameter() < MAX_DIAMETER
    assert lift_chain(chain).v == (0, 1)


def test_desk_config_is_valid():
    config = load_config(Path(__file__).resolve().parents[1] / "configs" / "desk.json")
    assert config.N0 == 8 and config.eps0 == 0.0625
