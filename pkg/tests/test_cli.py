"""Tests for the bandgp command line."""

import csv
import json
import sys

import numpy as np
import pytest
from click.testing import CliRunner
from loguru import logger

from bandgp.__main__ import cli
from bandgp.datasets import make_synthetic


@pytest.fixture
def runner():
    yield CliRunner()
    # the commands point loguru at the runner's stderr
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def train_csv(tmp_path):
    x, y = make_synthetic(300, seed=1)
    path = tmp_path / "train.csv"
    np.savetxt(path, np.column_stack([x, y]), delimiter=",")
    return path


def _fit(runner, train_csv, tmp_path, name="model.json", *extra):
    model = tmp_path / name
    report = tmp_path / f"{name}.report.json"
    args = ["fit", "--data", str(train_csv), "--out", str(model), "--num-basis", "20", "--max-iters", "15"]
    result = runner.invoke(cli, [*args, "--report", str(report), "--log-level", "ERROR", *extra])
    assert result.exit_code == 0, result.output
    return model, json.loads(report.read_text())


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "version" in result.output


def test_fit_writes_model_and_report(runner, train_csv, tmp_path):
    model, report = _fit(runner, train_csv, tmp_path)
    document = json.loads(model.read_text())
    assert document["version"] == 1
    assert document["family"] == "matern32"
    assert len(document["bases"]) == 1
    assert report["elbo_trace"][-1] == pytest.approx(report["final_elbo"])
    assert set(report["hyperparameters"]) == {"log_lengthscale_0", "log_amplitude_0", "log_noise"}


def test_fit_is_deterministic(runner, train_csv, tmp_path):
    first, _ = _fit(runner, train_csv, tmp_path, "a.json", "--seed", "4")
    second, _ = _fit(runner, train_csv, tmp_path, "b.json", "--seed", "4")
    assert first.read_text() == second.read_text()


def test_fit_rejects_empty_and_malformed_files(runner, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    result = runner.invoke(cli, ["fit", "--data", str(empty), "--out", str(tmp_path / "m.json")])
    assert result.exit_code != 0
    assert "no data rows" in result.output

    malformed = tmp_path / "malformed.csv"
    malformed.write_text("0.1,1.0\n0.2,abc\n")
    result = runner.invoke(cli, ["fit", "--data", str(malformed), "--out", str(tmp_path / "m.json")])
    assert result.exit_code != 0
    assert "line 2" in result.output


def test_predict_writes_one_row_per_query(runner, train_csv, tmp_path):
    model, _ = _fit(runner, train_csv, tmp_path)
    queries = tmp_path / "queries.csv"
    np.savetxt(queries, np.linspace(0.0, 1.0, 25)[:, None], delimiter=",")
    out = tmp_path / "pred.csv"
    result = runner.invoke(
        cli, ["predict", "--model", str(model), "--data", str(queries), "--out", str(out), "--log-level", "ERROR"]
    )
    assert result.exit_code == 0, result.output
    rows = list(csv.reader(out.open()))
    assert len(rows) == 25
    assert all(len(row) == 3 for row in rows)
    assert all(float(row[2]) > 0 for row in rows)


def test_eval_prints_metrics(runner, train_csv, tmp_path):
    model, _ = _fit(runner, train_csv, tmp_path)
    x, y = make_synthetic(50, seed=2)
    test = tmp_path / "test.csv"
    with test.open("w") as handle:
        handle.write("x,y\n")
        np.savetxt(handle, np.column_stack([x, y]), delimiter=",")
    result = runner.invoke(
        cli, ["eval", "--model", str(model), "--data", str(test), "--header", "--reference", "--log-level", "ERROR"]
    )
    assert result.exit_code == 0, result.output
    scores = json.loads(result.output)
    assert scores["mse"] >= 0.0
    assert np.isfinite(scores["nlpd"])
    assert scores["reference"] == {"mse": pytest.approx(0.039), "nlpd": -0.15}


def test_eval_rejects_wrong_column_count(runner, train_csv, tmp_path):
    model, _ = _fit(runner, train_csv, tmp_path)
    wide = tmp_path / "wide.csv"
    np.savetxt(wide, np.ones((4, 3)), delimiter=",")
    result = runner.invoke(cli, ["eval", "--model", str(model), "--data", str(wide), "--log-level", "ERROR"])
    assert result.exit_code != 0


def test_bench_writes_csv(runner, tmp_path):
    out = tmp_path / "bench.csv"
    args = ["bench", "--n-values", "200,400,800", "--m-values", "16,32", "--fixed-m", "16", "--fixed-n", "200"]
    result = runner.invoke(cli, [*args, "--out", str(out), "--log-level", "ERROR"])
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 10
    assert {row["kind"] for row in rows} == {"precompute", "elbo", "chol"}
    assert [row["m"] for row in rows if row["kind"] == "chol"] == ["16", "32"]
    assert all(float(row["seconds"]) >= 0 for row in rows)


def test_spatial_writes_csv(runner, tmp_path):
    out = tmp_path / "spatial.csv"
    args = ["spatial", "--m-values", "6,10", "--lengthscales", "0.2", "--repeats", "1", "--grid-size", "12"]
    result = runner.invoke(cli, [*args, "--out", str(out), "--log-level", "ERROR"])
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(out.open()))
    assert [row["m"] for row in rows] == ["6", "10"]
    assert all(np.isfinite(float(row["nlpd_mean"])) for row in rows)


def test_config_show_and_init(runner, monkeypatch):
    monkeypatch.setenv("BANDGP_NUM_BASIS", "42")
    with runner.isolated_filesystem():
        result = runner.invoke(cli, ["config", "show"])
        assert result.exit_code == 0
        assert "BANDGP_NUM_BASIS=42" in result.output
        assert "num_basis=42" in result.output

        result = runner.invoke(cli, ["config", "init"])
        assert "Created .env file" in result.output
        with open(".env") as handle:
            assert "BANDGP_NUM_BASIS=42\n" in handle.read()
        result = runner.invoke(cli, ["config", "init"])
        assert result.exit_code != 0
        assert "already exists" in result.output
        result = runner.invoke(cli, ["config", "init", "--force"])
        assert result.exit_code == 0
        assert "Created .env file" in result.output
