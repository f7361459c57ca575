from __future__ import annotations

import csv
import hashlib
import json

import numpy as np
import pytest

from oracles import brute_force_front
from chris.cli import main, parse_activities
from chris.difficulty import load_forest, tree_depth
from chris.signal import load_trace, windows
from chris.zoo import load_table, read_configs


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--windows-per-activity", "8", "--hr", "70", "--seed", "3",
                 "--out", str(root / "data")]) == 0
    assert main(["train-rf", "--trace", str(root / "data" / "trace.csv"),
                 "--out", str(root / "rf")]) == 0
    return root


def test_activity_syntax():
    assert parse_activities("1..3,7") == [1, 2, 3, 7]


def test_synth_equal_segments(tmp_path):
    assert main(["synth", "--activities", "1..9", "--windows-per-activity", "50",
                 "--seed", "1", "--out", str(tmp_path)]) == 0
    trace = load_trace(tmp_path / "trace.csv")
    labels = [w.activity for w in windows(trace)]
    assert np.bincount(labels, minlength=10)[1:].tolist() == [50] * 9
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 1 and trace.metadata["seed"] == 1


def test_synth_reproducible(tmp_path):
    args = ["synth", "--activities", "2,5", "--windows-per-activity", "3", "--seed", "4",
            "--hr", "60,150"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trace.csv", "trace.csv.meta.json", "manifest.json"):
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)


@pytest.mark.parametrize("bad", [["--hr", "400"], ["--activities", "0..3"],
                                 ["--windows-per-activity", "0"], ["--hr", "60,70"]])
def test_synth_argument_errors(tmp_path, bad):
    assert main(["synth", *bad, "--out", str(tmp_path)]) == 1


def test_parser_errors_exit_one():
    assert main(["nonsense"]) == 1
    assert main(["simulate", "--constraint", "min-mae=3", "--out", "x"]) == 1


def test_train_rf(workdir):
    forest = load_forest(workdir / "rf" / "forest.json")
    assert len(forest.trees) == 8
    assert all(tree_depth(t) <= 5 for t in forest.trees)
    assert json.loads((workdir / "rf" / "manifest.json").read_text())["seed"] == 0


def test_missing_trace(tmp_path):
    assert main(["train-rf", "--trace", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 1


def test_sweep_and_pareto(workdir):
    trace = str(workdir / "data" / "trace.csv")
    assert main(["sweep", "--trace", trace, "--forest", "oracle", "--out",
                 str(workdir / "sweep")]) == 0
    rows = read_configs(workdir / "sweep" / "sweep.csv")
    assert len(rows) == 60
    assert main(["pareto", "--configs", str(workdir / "sweep" / "sweep.csv"), "--out",
                 str(workdir / "pareto")]) == 0
    front = load_table(workdir / "pareto" / "pareto.csv")
    assert len(front) <= 60 and front.is_pareto()
    expected = sorted(c.key for c in brute_force_front(rows))
    assert sorted(c.key for c in front) == expected
    with (workdir / "pareto" / "plot.csv").open() as fh:
        plot = list(csv.DictReader(fh))
    energies = [float(r["avg_watch_mj"]) for r in plot]
    assert energies == sorted(energies) and len(plot) == 60
    assert sum(int(r["pareto"]) for r in plot) == len(front)


def test_profile_matches_sweep_energy(workdir):
    trace = str(workdir / "data" / "trace.csv")
    forest = str(workdir / "rf" / "forest.json")
    assert main(["profile", "--trace", trace, "--forest", forest, "--local-only",
                 "--out", str(workdir / "prof")]) == 0
    assert len(read_configs(workdir / "prof" / "configs.csv")) == 30


def test_simulate_fixture_table(workdir, tmp_path):
    trace = str(workdir / "data" / "trace.csv")
    assert main(["simulate", "--trace", trace, "--forest", "oracle", "--table", "example",
                 "--constraint", "max-mae=5.6", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    chosen = report["config_switches"][0]
    assert chosen["avg_mae_bpm"] <= 5.6 and not chosen["soft_violation"]
    assert report["metadata"]["seed"] == 3


def test_simulate_deterministic(workdir, tmp_path):
    args = ["simulate", "--trace", str(workdir / "data" / "trace.csv"),
            "--forest", str(workdir / "rf" / "forest.json"), "--constraint", "max-energy=1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("report.json", "windows.csv", "summary.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_soft_violation_exit(workdir, tmp_path):
    assert main(["simulate", "--trace", str(workdir / "data" / "trace.csv"), "--forest", "oracle",
                 "--constraint", "max-mae=0.5", "--out", str(tmp_path)]) == 2


def test_simulate_control_and_schedule(workdir, tmp_path):
    n = len(windows(load_trace(workdir / "data" / "trace.csv")))
    schedule = tmp_path / "schedule.json"
    schedule.write_text(json.dumps({"intervals": [
        {"start": 0, "end": 20, "status": "Connected"},
        {"start": 20, "end": n, "status": "Disconnected"},
    ]}))
    control = tmp_path / "control.json"
    control.write_text(json.dumps({"constraint": "max-energy=1", "schedule": str(schedule)}))
    table = tmp_path / "table.csv"
    table.write_text(
        "simple,complex,threshold,execution,avg_mae_bpm,avg_watch_mj,offload_fraction\n"
        "AT,TimePPG-Small,9,Local,10.0,0.234,0.0\n"
        "AT,TimePPG-Big,0,Hybrid,4.0,0.52,1.0\n")
    assert main(["simulate", "--trace", str(workdir / "data" / "trace.csv"), "--forest", "oracle",
                 "--table", str(table), "--control", str(control),
                 "--out", str(tmp_path / "out")]) == 0
    with (tmp_path / "out" / "windows.csv").open() as fh:
        log = list(csv.DictReader(fh))
    assert all(r["device"] == "Phone" for r in log[:20])
    assert all(r["device"] == "Watch" for r in log[20:])


def test_simulate_needs_constraint(workdir, tmp_path):
    assert main(["simulate", "--trace", str(workdir / "data" / "trace.csv"), "--forest", "oracle",
                 "--out", str(tmp_path)]) == 1
