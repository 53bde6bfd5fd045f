import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from uf2 import cli
from uf2.errors import ConfigError
from uf2.video_io import read_video, sidecar, write_video

ROOT = Path(__file__).resolve().parents[1]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def strip_time(payload: str) -> dict:
    d = json.loads(payload)
    d.pop("wall_time_s")
    return d


def test_forward_deterministic(capsys):
    args = ("forward", "--config", "tiny", "--init", "zero-appendix-a", "--synthetic", "7")
    c1, a, _ = run(capsys, *args)
    c2, b, _ = run(capsys, *args)
    assert c1 == c2 == 0
    assert strip_time(a) == strip_time(b)
    stats = json.loads(a)
    assert stats["argmax"] == int(np.argmax(stats["logits"]))
    assert len(stats["stage_token_norms"]) == 2
    assert stats["config"]["width"] == 8


def test_forward_preset_k400(capsys, tmp_path):
    out = tmp_path / "stats.json"
    code, _, _ = run(capsys, "forward", "--config", "uf2-b16-k400", "--init", "random:2", "--synthetic", "1", "--out", str(out))
    assert code == 0
    assert len(json.loads(out.read_text())["logits"]) == 400


def test_forward_input_file_and_weights(capsys, tmp_path):
    assert run(capsys, "init-weights", "--config", "tiny", "--init", "random:4", "--out", str(tmp_path / "w"))[0] == 0
    video = np.random.default_rng(0).uniform(-1, 1, (3, 4, 32, 32))
    write_video(tmp_path / "clip.bin", video)
    code, out, _ = run(capsys, "forward", "--config", "tiny", "--weights", str(tmp_path / "w"), "--input", str(tmp_path / "clip.bin"))
    assert code == 0
    code, ref, _ = run(capsys, "forward", "--config", "tiny", "--init", "random:4", "--input", str(tmp_path / "clip.bin"))
    assert strip_time(out) == strip_time(ref)


def test_video_roundtrip(tmp_path):
    v = np.random.default_rng(1).standard_normal((3, 2, 4, 4))
    write_video(tmp_path / "v.bin", v)
    assert json.loads(sidecar(tmp_path / "v.bin").read_text())["shape"] == [3, 2, 4, 4]
    np.testing.assert_array_equal(read_video(tmp_path / "v.bin"), v.astype(np.float32))


def test_exit_code_io(capsys, tmp_path):
    code, _, err = run(capsys, "forward", "--config", str(tmp_path / "missing.json"), "--init", "random:1", "--synthetic", "1")
    assert code == 2 and "error" in err
    code, _, _ = run(capsys, "forward", "--config", "tiny", "--weights", str(tmp_path / "nope"), "--synthetic", "1")
    assert code == 2
    code, _, _ = run(capsys, "forward", "--config", "tiny", "--init", "random", "--synthetic", "1")
    assert code == 2


def test_exit_code_shape(capsys, tmp_path):
    write_video(tmp_path / "clip.bin", np.zeros((3, 2, 32, 32)))
    code, _, err = run(capsys, "forward", "--config", "tiny", "--init", "random:1", "--input", str(tmp_path / "clip.bin"))
    assert code == 3 and "shape" in err


def test_count(capsys):
    code, out, _ = run(capsys, "count", "--config", "uf2-b16-k400", "--views", "1x3")
    assert code == 0
    d = json.loads(out)
    assert d["views"] == 3
    assert d["flops_total"] == sum(d["flops_breakdown"].values())
    assert d["params_total"] == sum(d["params_breakdown"].values())
    assert run(capsys, "count", "--config", "tiny", "--views", "3")[0] == 2


def test_parse_helpers():
    assert cli.parse_init("random:12") == ("random", 12)
    assert cli.parse_init("zero-appendix-a") == ("zero-appendix-a", 0)
    assert cli.parse_views("2x5") == 10
    for bad in ("random:x", "he:1"):
        with pytest.raises(ConfigError):
            cli.parse_init(bad)
    with pytest.raises(ConfigError):
        cli.parse_views("0x3")


def test_gradcheck_json_lines(capsys):
    code, out, _ = run(capsys, "gradcheck", "--seed", "0", "--seeds", "2")
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()]
    assert rows and all(r["pass"] for r in rows)
    assert {"op", "param", "max_rel_error", "tolerance", "pass"} <= set(rows[0])


def test_gradcheck_failure_exit(capsys):
    code, _, _ = run(capsys, "gradcheck", "--seeds", "1", "--tolerance", "1e-30")
    assert code == 1


def _csv(path, rows):
    path.write_text("youtube_id,label,split,source\n" + "".join(",".join(r) + "\n" for r in rows))


def test_k710_merge(tmp_path, capsys):
    labels = tmp_path / "labels"
    labels.mkdir()
    (labels / "k400.txt").write_text("Abseiling\nMaking tea\n")
    (labels / "k600.txt").write_text("abseiling\nBrewing tea\nIroning\n")
    (labels / "k700.txt").write_text("Ironing\nZumba\n")
    (tmp_path / "syn.json").write_text(json.dumps({"Brewing tea": "making tea"}))
    _csv(tmp_path / "a.csv", [("v1", "Abseiling", "train", "K400"), ("v2", "Making tea", "val", "K400")])
    _csv(tmp_path / "b.csv", [("v1", "abseiling", "train", "K600"), ("v3", "Brewing tea", "train", "K600")])
    _csv(tmp_path / "c.csv", [("v2", "Zumba", "train", "K700"), ("v4", "Ironing", "train", "K700")])
    argv = ["merge", "--k400", str(tmp_path / "a.csv"), "--k600", str(tmp_path / "b.csv"),
            "--k700", str(tmp_path / "c.csv"), "--labels", str(labels),
            "--synonyms", str(tmp_path / "syn.json"), "--out", str(tmp_path / "out")]
    assert cli.k710_main(argv) == 0
    assert json.loads(capsys.readouterr().out) == {"labels": 4, "train": 3}
    out = tmp_path / "out"
    assert (out / "labels.txt").read_text().split("\n")[:-1] == ["abseiling", "making tea", "ironing", "zumba"]
    assert json.loads((out / "mapping_K600.json").read_text()) == [0, 1, 2]
    assert (out / "train.csv").read_text().splitlines()[1:] == ["v1,abseiling,train,K400", "v3,making tea,train,K600", "v4,ironing,train,K700"]
    assert cli.main(["k710"] + argv) == 0

    _csv(tmp_path / "c.csv", [("v9", "Bowling", "train", "K700")])
    assert cli.k710_main(argv) == 2


def test_replay_script_matches_oracle():
    r = subprocess.run([sys.executable, str(ROOT / "scripts" / "replay_oracle.py"), "--config", "tiny", "--seed", "1"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["max_rel_diff"] <= 1e-10


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "uf2", "count", "--config", "tiny"], capture_output=True, text=True, timeout=60)
    assert r.returncode == 0
    assert json.loads(r.stdout)["params_total"] > 0
