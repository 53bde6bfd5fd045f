import json

import numpy as np
import pytest

from uf2.config import PRESETS
from uf2.errors import ConfigError, ShapeError
from uf2.weights import ModelWeights, param_manifest

from conftest import tiny_config


@pytest.mark.parametrize("dtype", ["float64", "float32"])
def test_save_load_roundtrip(tmp_path, dtype):
    cfg = tiny_config(dtype=dtype, fusion="parallel")
    w = ModelWeights.init(cfg, 3)
    w.save(tmp_path)
    back = ModelWeights.load(tmp_path, cfg)
    assert list(back) == list(w)
    for n in w:
        assert back[n].dtype == w[n].dtype
        np.testing.assert_array_equal(back[n], w[n])


def test_store_layout(tmp_path):
    cfg = tiny_config()
    w = ModelWeights.init(cfg, 0)
    w.save(tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [m["name"] for m in manifest] == [n for n, _ in param_manifest(cfg)]
    assert (tmp_path / "params.bin").stat().st_size == 8 * w.num_params()
    first = np.frombuffer((tmp_path / "params.bin").read_bytes()[:8], dtype="<f8")[0]
    assert first == w["embed.conv_w"].flat[0]


def test_truncated_store(tmp_path):
    cfg = tiny_config()
    ModelWeights.init(cfg, 0).save(tmp_path)
    raw = (tmp_path / "params.bin").read_bytes()
    (tmp_path / "params.bin").write_bytes(raw[:-8])
    with pytest.raises(ShapeError):
        ModelWeights.load(tmp_path, cfg)


def test_missing_store(tmp_path):
    with pytest.raises(ConfigError):
        ModelWeights.load(tmp_path / "nope", tiny_config())


def test_wrong_config(tmp_path):
    ModelWeights.init(tiny_config(), 0).save(tmp_path)
    with pytest.raises(ShapeError):
        ModelWeights.load(tmp_path, tiny_config(width=4))


def test_zero_init_set():
    cfg = tiny_config(fusion="parallel")
    w = ModelWeights.init(cfg, 1, "zero-appendix-a")
    zero = {n for n in w if not np.any(w[n])}
    expected = {n for n in w if n.endswith((".up_w", ".up_b", ".query", ".wo", ".bo", "ffn.w2", "ffn.b2"))
                and (n.startswith("global.") or ".lt." in n)}
    expected.add("fusion.alpha_raw")
    assert zero == expected


def test_shared_names_are_identical_across_configs():
    a = ModelWeights.init(tiny_config(), 4)
    b = ModelWeights.init(tiny_config(global_layers=(), local_mhra_count=0), 4)
    for n in b:
        np.testing.assert_array_equal(a[n], b[n])


def test_unknown_scheme():
    with pytest.raises(ConfigError):
        ModelWeights.init(tiny_config(), 0, "xavier")


def test_preset_manifests_build():
    for cfg in PRESETS.values():
        assert len(param_manifest(cfg)) > 0
