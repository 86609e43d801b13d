import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import tree_bytes
from signbench.codebook import load_vocabulary
from signbench.harness.cli import main
from signbench.nn import build_proposed_network, load_checkpoint

SMALL = {"vocab_sizes": [4, 6], "k_values": [1, 3], "metrics": ["l1", "l2"],
         "kernels": ["linear", "chi2"], "kmeans_max_iters": 15}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return path


def test_extract(tiny_signs_dir, tmp_path, capsys):
    train, _ = tiny_signs_dir
    assert main(["extract", "--data", str(train), "--out", str(tmp_path / "o")]) == 0
    npz = np.load(tmp_path / "o" / "descriptors.npz")
    assert npz["descriptors"].shape == (18 * 225, 128)
    assert npz["counts"].tolist() == [225] * 18
    assert "descriptors" in capsys.readouterr().out


def test_vocab(tiny_signs_dir, tmp_path, config):
    train, _ = tiny_signs_dir
    out = tmp_path / "v"
    assert main(["vocab", "--data", str(train), "--config", str(config), "--out", str(out)]) == 0
    assert load_vocabulary(out / "vocab_4.bovw").k == 4
    assert load_vocabulary(out / "vocab_6.bovw").dim == 128


def test_knn_grid_and_report_rerender(tiny_signs_dir, tmp_path, config):
    train, test = tiny_signs_dir
    out = tmp_path / "knn"
    args = ["knn-grid", "--data", str(train), "--test", str(test), "--config", str(config),
            "--seed", "5", "--out", str(out)]
    assert main(args) == 0
    assert (out / "tables" / "knn_L1_test.csv").read_bytes().startswith(b"k,4,6\r\n")
    assert json.loads((out / "config.json").read_text())["seed"] == 5
    again = tmp_path / "again"
    assert main(["report", str(out / "report.json"), "--out", str(again)]) == 0
    assert tree_bytes(out) == tree_bytes(again)


def test_svm_grid_with_threads(tiny_signs_dir, tmp_path, config):
    train, _ = tiny_signs_dir
    outs = []
    for threads in ("1", "2"):
        out = tmp_path / f"svm{threads}"
        assert main(["svm-grid", "--data", str(train), "--config", str(config),
                     "--threads", threads, "--out", str(out)]) == 0
        outs.append(out)
    a, b = (tree_bytes(o) for o in outs)
    assert a.pop("config.json") != b.pop("config.json")  # records the thread count
    assert a.pop("report.json") != b.pop("report.json")
    assert a == b


def test_cnn_train(tiny_signs_dir, tmp_path):
    train, test = tiny_signs_dir
    cfg = tmp_path / "cnn.json"
    cfg.write_text(json.dumps({"train": {"max_epochs": 1, "batch_size": 16}}))
    out = tmp_path / "cnn"
    assert main(["cnn-train", "--data", str(train), "--test", str(test), "--config", str(cfg),
                 "--out", str(out), "--timings"]) == 0
    assert len(load_checkpoint(out / "weights.sbnn")) == len(build_proposed_network(3).layers)
    assert (out / "confusion" / "cnn_testing.csv").exists()
    assert (out / "timings.csv").exists()


def test_exit_codes(tiny_signs_dir, tmp_path, config, capsys):
    train, _ = tiny_signs_dir
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text('{"pipeline": "nope"}')
    assert main(["knn-grid", "--data", str(train), "--config", str(bad_cfg), "--out", str(tmp_path)]) == 1
    assert main(["knn-grid", "--data", str(train), "--out", str(tmp_path),
                 "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["knn-grid", "--config", str(config), "--out", str(tmp_path)]) == 1
    assert main(["knn-grid", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path)]) == 2
    assert main(["report", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    huge = tmp_path / "huge.json"
    huge.write_text(json.dumps({"vocab_sizes": [10**6], "k_values": [1]}))
    assert main(["knn-grid", "--data", str(train), "--config", str(huge), "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert "config error" in err and "data error" in err and "error:" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "signbench", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("extract", "vocab", "knn-grid", "svm-grid", "cnn-train", "report"):
        assert cmd in res.stdout
