import csv
import json

import pytest

from laburst import MODEL_SCHEMA_VERSION
from laburst.cli import DEFAULTS, main, read_config


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def streams(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--output", d / "train.jsonl", "--truth", d / "train_truth.csv",
               "--duration", 1500, "--rate", 30, "--bursts", 4, "--first", 300,
               "--every", 300, "--burst-length", "60,180", "--tokens", "storm,blast",
               "--rng-seed", 3, "--name", "train") == 0
    assert run("synth", "--output", d / "test.jsonl", "--truth", d / "test_truth.csv",
               "--duration", 900, "--rate", 30, "--bursts", 2, "--first", 300,
               "--every", 300, "--tokens", "goal", "--rng-seed", 4, "--name", "test") == 0
    return d


def test_version(capsys):
    assert run("--version") == 0
    assert f"model schema {MODEL_SCHEMA_VERSION}" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert run() == 1
    assert run("bogus") == 1
    assert run("detect", "--input", tmp_path / "x.jsonl") == 1
    assert "--model is required" in capsys.readouterr().err
    (tmp_path / "m.json").write_text("{}")
    assert run("detect", "--model", tmp_path / "m.json", "--input", tmp_path / "none.jsonl",
               "--output", tmp_path / "o.jsonl") == 1
    assert "--input" in capsys.readouterr().err
    assert run("eval", "--truth", tmp_path / "m.json", "--series", tmp_path / "m.json") == 1


def test_data_errors(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"schema": 99}')
    msgs = tmp_path / "s.jsonl"
    msgs.write_text('{"id":"1","timestamp":5,"user":"a","text":"x"}\n')
    assert run("detect", "--model", bad, "--input", msgs, "--output", tmp_path / "o") == 2
    bad.write_text("not json")
    assert run("detect", "--model", bad, "--input", msgs, "--output", tmp_path / "o") == 2


def test_config_file_and_flag_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# synthetic run\nrate = 2\nduration = 120  # seconds\nbursts = 0\n")
    assert read_config(conf) == {"rate": "2", "duration": "120", "bursts": "0"}
    out = tmp_path / "m.jsonl"
    assert run("synth", "--config", conf, "--output", out, "--truth", tmp_path / "t.csv") == 0
    assert len(out.read_text().splitlines()) == 240
    assert run("synth", "--config", conf, "--rate", 1, "--output", out,
               "--truth", tmp_path / "t.csv") == 0
    assert len(out.read_text().splitlines()) == 120
    conf.write_text("nonsense = 1\n")
    assert run("synth", "--config", conf, "--output", out, "--truth", tmp_path / "t.csv") == 1


def test_defaults_match_model_settings():
    assert (DEFAULTS["delta"], DEFAULTS["omega"], DEFAULTS["k"], DEFAULTS["tau"]) == (60, 180, 10, 2)


def test_baseline_and_eval_wiring(streams, tmp_path):
    d = streams
    raw = tmp_path / "raw.csv"
    assert run("baseline", "--method", "rawburst", "--input", d / "test.jsonl",
               "--output", raw) == 0
    rows = list(csv.DictReader(open(raw)))
    assert len(rows) == 15 and rows[10]["warmup"] == "0"
    tok = tmp_path / "tok.csv"
    assert run("baseline", "--method", "tokenburst", "--input", d / "test.jsonl",
               "--output", tok, "--lexicon-group", "World Cup") == 0
    assert run("baseline", "--method", "tokenburst", "--input", d / "test.jsonl",
               "--output", tok, "--lexicon-group", "Cricket") == 1
    summary = tmp_path / "s.json"
    assert run("eval", "--truth", d / "test_truth.csv", "--series", f"{tok}:test",
               "--roc", tmp_path / "roc.csv", "--summary", summary,
               "--method", "tokenburst", "--tau", 0) == 0
    result = json.loads(summary.read_text())[0]
    assert result["method"] == "tokenburst" and result["composite_auc"] == 1.0


def test_train_detect_selftrain_ablate(streams, tmp_path):
    d = streams
    model, data = tmp_path / "m.json", tmp_path / "train.csv"
    small = ["--forest-trees", 32, "--threads", 1]
    assert run("train", "--input", d / "train.jsonl", "--truth", d / "train_truth.csv",
               "--model", model, "--training-output", data, *small) == 0
    doc = json.loads(model.read_text())
    assert doc["schema"] == MODEL_SCHEMA_VERSION and len(doc["stages"]) == 2
    log = tmp_path / "d.jsonl"
    assert run("detect", "--model", model, "--input", d / "test.jsonl", "--output", log,
               "--rho", 2) == 0
    recs = [json.loads(x) for x in log.read_text().splitlines()]
    assert len(recs) == 15 and all(r["rho"] == 2 for r in recs)
    assert run("eval", "--truth", d / "test_truth.csv", "--series", log,
               "--summary", tmp_path / "s.json") == 0
    star = tmp_path / "star.json"
    assert run("train", "--training", data, "--model", star, "--exclude",
               "average_difference", *small) == 0
    assert json.loads(star.read_text())["columns"] == [0, 1, 2, 6, 7, 8, 9, 10, 11]
    assert run("train", "--training", data, "--model", star, "--exclude", "colour") == 1
    assert run("selftrain", "--model", model, "--training", data, "--input", d / "test.jsonl",
               "--output", tmp_path / "m2.json", *small) == 0
    abl = tmp_path / "a.csv"
    assert run("ablate", "--training", data, "--output", abl, "--folds", 3, *small) == 0
    assert len(list(csv.DictReader(open(abl)))) == 9
    grid = tmp_path / "g.json"
    assert run("gridsearch", "--training", data, "--output", grid, "--folds", 3,
               "--svm-c-exp", "0:1", "--svm-gamma-exp=-1:-1", "--trees-exp", "3:3",
               "--features-exp", "1:1", "--threads", 1) == 0
    assert set(json.loads(grid.read_text())) == {"svm", "forest"}


def test_features_command(streams, tmp_path):
    out = tmp_path / "f.csv"
    assert run("features", "--input", streams / "test.jsonl", "--output", out) == 0
    header = open(out).readline().strip().split(",")
    assert header[:2] == ["window_end_time", "token"]
