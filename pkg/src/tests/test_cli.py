import csv
import json
from pathlib import Path

import pytest

from nominator.__main__ import main

FAST = ["--burn-in", "500", "--samples", "3000"]


def _rows(path) -> list[dict]:
    with path.open() as f:
        return list(csv.DictReader(f))


def test_infer_on_table1(table1_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["infer", str(table1_path), "--out", str(out), *FAST]) == 0
    stdout = capsys.readouterr().out
    assert stdout.startswith("nominee 3 ")

    summary = json.loads((out / "summary.json").read_text())
    assert summary["nominee"] == 3
    assert summary["index_base"] == 1
    assert set(summary["marginals"]) == {str(v) for v in range(3, 13)}
    marginals = _rows(out / "marginals.csv")
    assert marginals[0]["vertex"] == "3"
    assert (marginals[0]["r"], marginals[0]["s"]) == ("1", "4")
    assert len(_rows(out / "trace.csv")) == 3000
    assert json.loads((out / "config.json").read_text())["command"] == "infer"
    assert (out / "prior_marginals.csv").exists()
    assert not (out / "moving_averages.csv").exists()


def test_infer_is_byte_deterministic(table1_path, tmp_path, capsys):
    args = ["infer", str(table1_path), "--burn-in", "20", "--samples", "50", "--seed", "5"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    first = capsys.readouterr().out
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    assert capsys.readouterr().out == first
    for name in ["summary.json", "marginals.csv", "trace.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_infer_with_a_single_recorded_iteration(table1_path, tmp_path):
    out = tmp_path / "out"
    args = ["infer", str(table1_path), "--burn-in", "0", "--samples", "1", "--traces"]
    assert main([*args, "--out", str(out), "--format", "csv", "--one-based"]) == 0
    summary = {row["key"]: row["value"] for row in _rows(out / "summary.csv")}
    assert summary["samples"] == "1"
    assert len(_rows(out / "moving_averages.csv")) == 1


def test_missing_graph_exits_with_io_error(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["infer", str(tmp_path / "absent.txt"), "--out", str(out)]) == 2
    assert "absent.txt" in capsys.readouterr().err
    assert not out.exists()


def test_malformed_graph_names_the_line(tmp_path, capsys):
    path = tmp_path / "g.txt"
    path.write_text("observed_red: 0 1\n1 0\n2 7\n")
    assert main(["infer", str(path), "--out", str(tmp_path / "out")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_invalid_parameters_name_the_constraint(tmp_path, capsys):
    args = ["simulate", "--n", "10", "--m", "4", "--mprime", "2"]
    params = ["--p1", "0.2", "--p2", "0.4", "--q2", "0.3"]
    assert main([*args, *params, "--out", str(tmp_path / "out")]) == 1
    assert "p2 <= q2" in capsys.readouterr().err


def test_simulate_accepts_boundary_parameters(tmp_path, capsys):
    out = tmp_path / "sim"
    args = ["simulate", "--n", "8", "--m", "3", "--mprime", "2"]
    params = ["--p1", "0.3", "--p2", "0", "--q2", "0"]
    assert main([*args, *params, "--out", str(out)]) == 0
    path = capsys.readouterr().out.split()[0]
    graph = json.loads(Path(path).read_text())
    assert all(edge[2] == 1 for edge in graph["edges"])
    truth = json.loads((out / "graph_0000.truth.json").read_text())
    assert truth["params"] == {"p1": 0.3, "p2": 0.0, "q2": 0.0}


def test_usage_errors_exit_with_one(capsys):
    assert main(["infer"]) == 1
    assert main(["study", "--samples", "many"]) == 1


def test_simulate_then_infer(tmp_path, capsys):
    out = tmp_path / "sim"
    args = ["simulate", "--n", "10", "--m", "4", "--mprime", "2", "--count", "2"]
    params = ["--p1", "0.2", "--p2", "0.1", "--q2", "0.4"]
    assert main([*args, *params, "--out", str(out), "--seed", "3"]) == 0
    paths = capsys.readouterr().out.split()
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["graph_0000.json", "graph_0001.json"]
    truth = json.loads((out / "graph_0000.truth.json").read_text())
    graph = json.loads((out / "graph_0000.json").read_text())
    assert len(truth["red"]) == 4
    assert set(graph["observed_red"]) < set(truth["red"])

    inferred = tmp_path / "inferred"
    assert main(["infer", paths[0], "--out", str(inferred), "--samples", "100"]) == 0
    assert capsys.readouterr().out.startswith("nominee ")


def test_baseline_on_table1(table1_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["baseline", str(table1_path), "--lambda", "0.5", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out.splitlines()
    assert stdout[0] == "nominee 3 (lambda = 0.5)"
    assert stdout[1] == "3\t2.5"
    assert len(_rows(out / "fusion.csv")) == 10


def test_baseline_sweep_uses_the_truth_sidecar(table1_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["baseline", str(table1_path), "--grid", "0,0.5,1", "--out", str(out)]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "best lambda 0"
    sweep = json.loads((out / "sweep.json").read_text())
    assert sweep["rates"] == [1.0, 1.0, 1.0]


def test_baseline_sweep_without_truth_is_rejected(tmp_path, capsys):
    path = tmp_path / "g.txt"
    path.write_text("observed_red: 0 1\n1 0\n2\n")
    out = tmp_path / "out"
    assert main(["baseline", str(path), "--grid", "0,1", "--out", str(out)]) == 1
    assert "ground truth" in capsys.readouterr().err
    assert not out.exists()


def test_small_study_writes_every_document(tmp_path, capsys):
    out = tmp_path / "out"
    args = ["study", "--n", "8", "--m", "4", "--mprime", "2,3", "--trials", "3"]
    params = ["--p1", "0.2", "--p2", "0.1", "--q2", "0.4", "--n-boot", "100"]
    sampler = ["--burn-in", "20", "--samples", "40", "--hyperpriors", "sparse,flat"]
    assert main([*args, *params, *sampler, "--out", str(out)]) == 0
    for name in ["trials_mprime2.csv", "thresholds_mprime3.csv", "study_mprime2.json"]:
        assert (out / name).exists()
    assert len(_rows(out / "comparison.csv")) == 2
    assert len(_rows(out / "hyperprior_sensitivity.csv")) == 2
    assert "m=4 m'=2" in capsys.readouterr().out


def test_combinations_need_a_single_observed_count(table1_path, tmp_path):
    args = ["combinations", str(table1_path), "--out", str(tmp_path / "out")]
    assert main([*args, "--mprime", "2,3"]) == 1
    assert main([*args, "--mprime", "2", "--burn-in", "10", "--samples", "20"]) == 0
    rows = _rows(tmp_path / "out" / "combinations.csv")
    assert len(rows) == 10


def test_help_lists_the_presets(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    stdout = capsys.readouterr().out
    assert "toy-12" in stdout
    assert "flat-half" in stdout
