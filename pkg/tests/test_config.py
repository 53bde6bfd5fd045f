import json

import pytest

from uf2.config import PRESETS, ModelConfig
from uf2.errors import ConfigError


@pytest.mark.parametrize(
    "changes",
    [
        dict(width=10, heads=4),
        dict(frames=3),
        dict(resolution=30),
        dict(local_mhra_count=3),
        dict(tube=2),
        dict(global_layers=(13,)),
        dict(global_layers=(10, 9)),
        dict(local_mhra_layers=(0,)),
        dict(fusion="mean"),
        dict(dtype="float16"),
        dict(reduction=1000.0),
        dict(nq=0),
    ],
)
def test_invalid_configs(changes):
    with pytest.raises(ConfigError):
        ModelConfig(**changes)


def test_inner_width_floor():
    assert ModelConfig(reduction=1.5).inner_width == 512
    assert ModelConfig(width=8, heads=2, reduction=3.0, global_layers=(), depth=1).inner_width == 2


@pytest.mark.parametrize("name", list(PRESETS))
def test_json_roundtrip(tmp_path, name):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(PRESETS[name].to_dict()))
    assert ModelConfig.load(p) == PRESETS[name]
    assert ModelConfig.load(name) == PRESETS[name]


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ModelConfig.load("no-such-preset")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ModelConfig.load(bad)
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"width": 8, "colour": "red"})
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ModelConfig.load(bad)
