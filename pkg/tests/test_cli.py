import json

import numpy as np
import pytest

from lbbnet import __version__
from lbbnet import dataset as dsmod
from lbbnet import neuralnet as nn
from lbbnet.array import ArrayConfig
from lbbnet.cli import main
from lbbnet.scene import Building, Scene, save_scene

SMALL_NET = ["--rff", "8", "--depth", "2", "--width", "16", "--epochs", "2", "--batch", "16"]


@pytest.fixture
def scene_file(tmp_path):
    sc = Scene((0, 0, 80, 60), [Building(30, 20, 45, 40)], (5, 30), max_paths=5)
    p = tmp_path / "scene.json"
    save_scene(sc, p)
    return str(p)


@pytest.fixture
def data_file(tmp_path, scene_file):
    out = str(tmp_path / "d.lbbd")
    assert main(["generate", "--scene", scene_file, "--side", "2", "--n", "80", "--seed", "1",
                 "--out", out]) == 0
    return out


def test_generate_is_byte_identical_on_rerun(tmp_path, scene_file, capsys):
    a, b = str(tmp_path / "a.lbbd"), str(tmp_path / "b.lbbd")
    for out in (a, b):
        assert main(["generate", "--scene", scene_file, "--side", "2", "--n", "50", "--seed", "7",
                     "--out", out]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    assert "N=50 zero_norm=" in capsys.readouterr().out
    man = json.loads(open(a + ".manifest.json").read())
    assert man["command"] == "generate" and man["seeds"]["users"] == 7
    assert man["tool_version"] == __version__ and "duration_seconds" in man


def test_default_scene_zero_norm_fraction(tmp_path):
    out = str(tmp_path / "d.lbbd")
    assert main(["generate", "--side", "2", "--n", "2000", "--seed", "0", "--out", out]) == 0
    frac = dsmod.load(out).zero_norm.mean()
    assert 0 < frac < 0.3


def test_generate_rejects_zero_n(tmp_path):
    assert main(["generate", "--n", "0", "--out", str(tmp_path / "x")]) == 2


def test_generate_bad_scene(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1, "bounds": [0, 0, -5, 10]}')
    assert main(["generate", "--scene", str(bad), "--n", "5", "--out", str(tmp_path / "x")]) == 2


def test_generate_unwritable_output(tmp_path, scene_file):
    out = str(tmp_path / "missing_dir" / "d.lbbd")
    assert main(["generate", "--scene", scene_file, "--n", "5", "--out", out]) == 3


def test_train_missing_data(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nope.lbbd"), "--out", str(tmp_path / "m")]) == 3


def test_train_corrupt_data(tmp_path, data_file):
    blob = open(data_file, "rb").read()
    bad = tmp_path / "bad.lbbd"
    bad.write_bytes(blob[:60])
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "m")] + SMALL_NET) == 3


def test_train_empty_training_set(tmp_path):
    ds = dsmod.LabeledDataset(ArrayConfig(2, 3.5e9), np.ones((5, 2)), np.zeros((5, 4)))
    p = tmp_path / "zero.lbbd"
    dsmod.save(ds, p)
    assert main(["train", "--data", str(p), "--out", str(tmp_path / "m")] + SMALL_NET) == 4


def test_train_single_step(tmp_path, data_file):
    n_live = int((~dsmod.load(data_file).zero_norm).sum())
    out = str(tmp_path / "m.lbbm")
    args = ["train", "--data", data_file, "--out", out, "--rff", "8", "--depth", "2",
            "--width", "16", "--epochs", "1", "--batch", str(n_live)]
    assert main(args) == 0
    man = json.loads(open(out + ".manifest.json").read())
    assert man["steps"] == 1
    trace = open(out + ".trace.csv").read().splitlines()
    assert trace[0] == "epoch,cost" and len(trace) == 2


def test_train_default_hyperparameters():
    from lbbnet.cli import build_parser
    a = build_parser().parse_args(["train", "--data", "d", "--out", "m"])
    assert (a.rff, a.sigma_inv, a.depth, a.width, a.epochs, a.batch) == (1000, 50.0, 4, 512, 50, 100)


def test_train_bad_config(tmp_path, data_file):
    assert main(["train", "--data", data_file, "--out", str(tmp_path / "m"), "--batch", "100000"]) == 2
    assert main(["train", "--data", data_file, "--out", str(tmp_path / "m"), "--rff", "-3"]) == 2


def test_train_mlp_arch(tmp_path, data_file):
    out = str(tmp_path / "m.lbbm")
    assert main(["train", "--data", data_file, "--out", out, "--arch", "mlp"] + SMALL_NET) == 0
    model = nn.load_model(out)
    assert model.arch == "mlp" and model.weights[0].shape == (2, 16)


def test_training_is_reproducible(tmp_path, data_file):
    a, b = str(tmp_path / "a.lbbm"), str(tmp_path / "b.lbbm")
    for out in (a, b):
        assert main(["train", "--data", data_file, "--out", out] + SMALL_NET) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    assert open(a + ".trace.csv").read() == open(b + ".trace.csv").read()


def test_eval_oracle_baseline(tmp_path, data_file, capsys):
    summ = tmp_path / "s.json"
    cdf = tmp_path / "c.csv"
    assert main(["eval", "--baseline", "oracle", "--data", data_file, "--summary", str(summ),
                 "--cdf", str(cdf)]) == 0
    s = json.loads(summ.read_text())
    assert s["median"] == pytest.approx(1.0, abs=1e-6)
    assert s["excluded_count"] == int(dsmod.load(data_file).zero_norm.sum())
    assert set(s) >= {"median", "mean", "excluded_count"}


def test_eval_orthogonal_baseline(tmp_path, data_file, capsys):
    assert main(["eval", "--baseline", "orthogonal-oracle", "--data", data_file]) == 0
    s = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert s["median"] < 1e-10


def test_eval_direction_on_single_path_data(tmp_path, capsys):
    sc = Scene((0, 0, 100, 100), [], (50, 50), max_bounces=0)
    sf = tmp_path / "los.json"
    save_scene(sc, sf)
    out = str(tmp_path / "d.lbbd")
    assert main(["generate", "--scene", str(sf), "--side", "4", "--n", "100", "--out", out]) == 0
    capsys.readouterr()
    assert main(["eval", "--baseline", "direction", "--data", out]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["median"] == pytest.approx(1.0, abs=1e-9)


def test_eval_model_on_split_and_grid(tmp_path, data_file, scene_file, capsys):
    model = str(tmp_path / "m.lbbm")
    assert main(["train", "--data", data_file, "--out", model, "--test-fraction", "0.25"]
                + SMALL_NET) == 0
    vals = tmp_path / "v.csv"
    assert main(["eval", "--model", model, "--data", data_file, "--test-fraction", "0.25",
                 "--values", str(vals)]) == 0
    assert vals.read_text().startswith("index,eta")
    svg, grid = tmp_path / "h.svg", tmp_path / "g.csv"
    capsys.readouterr()
    assert main(["eval", "--model", model, "--scene", scene_file, "--grid-pitch", "5",
                 "--heatmap", str(svg), "--grid-csv", str(grid)]) == 0
    s = json.loads(capsys.readouterr().out)
    assert {"los_mean", "nlos_mean"} <= set(s)
    assert svg.read_text().startswith("<svg")
    assert len(grid.read_text().splitlines()) == 1 + 17 * 13


def test_eval_needs_a_source(tmp_path):
    assert main(["eval", "--baseline", "oracle"]) == 2
    assert main(["eval", "--data", "x"]) == 2


def test_sweep_is_deterministic(tmp_path, scene_file):
    outs = [str(tmp_path / f"s{k}.csv") for k in range(2)]
    for out in outs:
        assert main(["sweep", "--scene", scene_file, "--side", "2", "--n-list", "40,80",
                     "--eval-size", "30", "--no-timings", "--out", out] + SMALL_NET) == 0
    a, b = (open(o).read() for o in outs)
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "N,median_eta,mean_eta" and len(lines) == 3


def test_sweep_single_row_with_timings(tmp_path, scene_file):
    out = str(tmp_path / "s.csv")
    assert main(["sweep", "--scene", scene_file, "--side", "2", "--n-list", "100",
                 "--eval-size", "30", "--out", out] + SMALL_NET) == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "N,median_eta,mean_eta,train_seconds" and len(lines) == 2


def test_replay_reproduces_outputs(tmp_path, data_file):
    out = str(tmp_path / "m.lbbm")
    assert main(["train", "--data", data_file, "--out", out] + SMALL_NET) == 0
    first = open(out, "rb").read()
    assert main(["replay", out + ".manifest.json"]) == 0
    assert open(out, "rb").read() == first


def test_replay_bad_manifest(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    assert main(["replay", str(p)]) == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    out = capsys.readouterr().out
    assert __version__ in out and "LBBD" in out and "LBBM" in out
