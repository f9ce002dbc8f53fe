import json
import subprocess
import sys

import pytest

from flexweld.cli import main


def read(path):
    return json.loads(path.read_text())


def test_capacity_of_an_arc(tmp_path):
    arcs = tmp_path / "arcs.json"
    arcs.write_text("[[0.0, 1.0]]")
    assert main(["capacity", str(arcs), "--out", str(tmp_path / "o")]) == 0
    res = read(tmp_path / "o" / "capacity.json")
    assert res["extrapolated"]["capacity"] == pytest.approx(0.247404, rel=1e-4)   # sin(1/4)
    man = read(tmp_path / "o" / "manifest.json")
    assert man["command"] == "capacity" and man["status"] == "ok"
    assert "wall_time" not in man or man["wall_time"] is None


def test_malformed_json_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('[[0.0, 1.0]\n  oops')
    assert main(["capacity", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_file_and_bad_flags(tmp_path):
    assert main(["capacity", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2
    assert main(["dim", "--s", "2.5", "--out", str(tmp_path)]) == 2
    assert main(["frobnicate"]) == 2


def test_dim_estimate(tmp_path):
    assert main(["dim", "--s", "1.5", "--depth", "3", "--estimate", "--out", str(tmp_path)]) == 0
    res = read(tmp_path / "dim.json")
    assert res["pass"] and abs(res["estimate"] - 1.5) <= 0.1
    assert (tmp_path / "tree.svg").exists() and (tmp_path / "box_dim.csv").exists()


def test_dim_depth_zero_is_root(tmp_path):
    assert main(["dim", "--s", "1.5", "--depth", "0", "--out", str(tmp_path)]) == 0
    assert read(tmp_path / "dim.json")["leaves"] == 1


def test_dim_is_byte_identical(tmp_path):
    for k in (1, 2):
        assert main(["dim", "--s", "1.2", "--depth", "2", "--estimate", "--seed", "3",
                     "--out", str(tmp_path / str(k))]) == 0
    for name in ("dim.json", "manifest.json", "tree.svg", "box_dim.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_weld_rejects_bad_config(tmp_path):
    cfg = tmp_path / "w.json"
    cfg.write_text(json.dumps({"N_schedule": [4]}))
    assert main(["weld", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text("[1, 2]")
    assert main(["weld", str(cfg), "--out", str(tmp_path)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "flexweld", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "capacity" in r.stdout
