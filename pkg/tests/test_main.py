import csv
import json

import pytest

from core import code
from core.decoder import DecoderParams
import main


@pytest.fixture
def code_file(tmp_path, small_code):
    path = tmp_path / "small.json"
    path.write_bytes(code.serialize(small_code))
    return str(path)


def test_bound(capsys):
    assert main.main(["bound", "--rate", "1/2", "--p-d", "0.05"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert float(lines[0]) == pytest.approx(0.0744, abs=1e-3)
    assert lines[1].startswith("p_D=0.05: ")


def test_usage_errors(capsys):
    assert main.main([]) == 2
    assert main.main(["construct", "--e", "3"]) == 2
    assert main.main(["bound"]) == 2
    assert main.main(["bound", "--rate", "1.5"]) == 2
    assert main.main(["bound", "--p-d", "1/0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_code_file(tmp_path, capsys):
    assert main.main(["verify", str(tmp_path / "missing.json")]) == 1
    assert "FileNotFoundError" in capsys.readouterr().err


def test_construct_then_verify(tmp_path, capsys):
    out = str(tmp_path / "code.json")
    assert main.main(["--quiet", "construct", "--preset", "8", "--e", "3",
                      "--mode", "conventional", "--out", out]) == 0
    assert main.main(["verify", out, "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] and report["orthogonal"]
    assert (report["n"], report["mode"]) == (144, "conventional")
    assert report["girth"] == 8
    assert report["k"] == report["n"] - report["rank_H_X"] - report["rank_H_Z"]


def test_catalog(code_file, capsys):
    assert main.main(["catalog", code_file]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 48
    assert {row["side"] for row in rows} == {"Gamma", "Delta"}
    assert all(len(row["columns"]) == 6 for row in rows)

    assert main.main(["catalog", code_file, "--side", "Gamma", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "side,j,r,columns,rows,log_labels,determinant"
    assert len(lines) == 25


def test_distance(code_file, capsys):
    assert main.main(["distance", code_file, "--max-cycle-len", "12", "--format", "json"]) == 0
    assert "d" in json.loads(capsys.readouterr().out)
    assert main.main(["distance", code_file, "--max-cycle-len", "10"]) == 2


def test_simulate(code_file, tmp_path, capsys):
    out = tmp_path / "results"
    assert main.main(["--quiet", "simulate", code_file, "--p-d", "0", "--trials", "3",
                      "--max-iters", "10", "--out", str(out)]) == 0
    assert "FER=0" in capsys.readouterr().out

    trials = (out / "trials.jsonl").read_text().splitlines()
    assert len(trials) == 3
    assert all(json.loads(line)["outcome"] == "exact" for line in trials)

    summary = json.loads((out / "summary.json").read_text())
    assert summary["meta"]["decoder"] == "bp-post"
    assert summary["points"][0]["trials"] == 3

    with open(out / "fer.csv", newline="") as stream:
        rows = list(csv.DictReader(stream))
    assert [row["criterion"] for row in rows] == ["degenerate", "exact"]
    assert all(row["failures"] == "0" for row in rows)


def test_simulate_rejects_bad_probabilities(code_file):
    assert main.main(["simulate", code_file, "--p-d", "0.8"]) == 2


def test_run_config_defaults():
    config = main.RunConfig("bound", rate=0.5)
    assert config.decoder_params == DecoderParams()
    assert config.validate() is config
