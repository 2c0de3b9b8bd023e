import subprocess
import sys

import pytest

from roomtrace.cli import main


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Small simulate -> train -> reconstruct -> analyze run shared by the tests."""
    root = tmp_path_factory.mktemp("run")
    run_pipeline(root)
    return root


def run_pipeline(root):
    r = str(root)
    steps = f"""
simulate --visitors 8 --groups 1 --seed 7 --out {r}/sim
train --log {r}/sim/sightings.jsonl --labels {r}/sim/labels.jsonl --iterations 40 --hidden 8 --train-bins 800 --seed 7 --out {r}/model
reconstruct --log {r}/sim/sightings.jsonl --method am --out {r}/rec
reconstruct --log {r}/sim/sightings.jsonl --method ma --window 3,3 --out {r}/rec
reconstruct --log {r}/sim/sightings.jsonl --method nn --model {r}/model/model.json --out {r}/rec
eval --labels {r}/sim/labels.jsonl --trajectories {r}/rec/trajectories_nn.tsv --out {r}/ev
analyze --trajectories {r}/rec/trajectories_ma.tsv --labels {r}/sim/labels.jsonl --min-visit 0 --max-visit 1000 --out {r}/an
distmat --trajectories {r}/rec/trajectories_ma.tsv --min-visit 0 --max-visit 1000 --out {r}/an
common --distances {r}/an/distances.tsv --out {r}/an
groups --distances {r}/an/distances.tsv --threshold 500 --out {r}/an
transition --trajectories {r}/rec/trajectories_ma.tsv --out {r}/an
"""
    for line in steps.strip().splitlines():
        assert main(line.split()) == 0, line


def snapshot(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_pipeline_outputs(pipeline):
    for name in [
        "sim/sightings.jsonl", "sim/labels.jsonl", "sim/planted_groups.tsv", "model/model.json",
        "model/train_loss.tsv", "rec/trajectories_nn.tsv", "rec/segments_am.tsv", "ev/eval.tsv",
        "an/permanence.tsv", "an/tov_summary.tsv", "an/clockwisety_hist.tsv", "an/distances.tsv",
        "an/common.tsv", "an/groups.tsv", "an/transition.tsv", "an/distance_hist.tsv",
    ]:
        assert (pipeline / name).stat().st_size > 0, name


def test_pipeline_is_byte_identical(pipeline, tmp_path):
    run_pipeline(tmp_path)
    assert snapshot(tmp_path) == snapshot(pipeline)


def test_nn_without_model_fails(pipeline, capsys):
    code = main(["reconstruct", "--log", str(pipeline / "sim/sightings.jsonl"), "--method", "nn", "--out", str(pipeline / "x")])
    assert code == 2
    assert "model required" in capsys.readouterr().err


def test_bad_inputs_give_categorized_errors(tmp_path, capsys):
    bad = tmp_path / "log.jsonl"
    bad.write_text('{"beacon": "a", "receiver": 1, "rssi": -60, "ts": 0}\n{oops\n')
    assert main(["reconstruct", "--log", str(bad), "--out", str(tmp_path)]) == 4
    assert "line 2" in capsys.readouterr().err
    assert main(["reconstruct", "--log", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)]) == 3
    graph = tmp_path / "g.toml"
    graph.write_text('[[rooms]]\nname = "A"\n')
    assert main(["simulate", "--graph", str(graph), "--out", str(tmp_path)]) == 4
    assert "error: schema" in capsys.readouterr().err


def test_help_runs():
    res = subprocess.run([sys.executable, "-m", "roomtrace.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "reconstruct" in res.stdout
    with pytest.raises(SystemExit) as err:
        main(["reconstruct", "--window", "x"])
    assert err.value.code == 2
