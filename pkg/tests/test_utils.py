"""Tests for bandgp.utils, bandgp.config and bandgp.bench."""

import csv

import numpy as np
import pytest
from loguru import logger

import bandgp.bench
from bandgp.bench import BenchRow
from bandgp.bench import SpatialRow
from bandgp.bench import linear_r2
from bandgp.bench import run_spatial
from bandgp.bench import time_chol
from bandgp.bench import write_csv
from bandgp.config import BandGPSettings
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.exceptions import InvalidDataError
from bandgp.utils import check_finite
from bandgp.utils import iter_csv_blocks
from bandgp.utils import read_csv
from bandgp.utils import setup_logger


def test_check_finite():
    np.testing.assert_array_equal(check_finite([1, 2], "x"), [1.0, 2.0])
    with pytest.raises(InvalidDataError) as info:
        check_finite([[0.0, 1.0], [2.0, np.inf]], "x")
    assert info.value.index == 1


def test_csv_blocks(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a;b\n1;2\n\n3e-1;4.5\n5;6\n")
    blocks = list(iter_csv_blocks(path, delimiter=";", header=True, block_size=2))
    assert [block.shape for block in blocks] == [(2, 2), (1, 2)]
    np.testing.assert_allclose(read_csv(path, delimiter=";", header=True), [[1, 2], [0.3, 4.5], [5, 6]])


@pytest.mark.parametrize(
    "content, line",
    [
        ("1,2\n3\n", 2),
        ("1,2\n3,x\n", 2),
        ("1,nan\n", 1),
        ("1,2\n3,4,5\n", 2),
    ],
)
def test_csv_errors_carry_line(tmp_path, content, line):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(InvalidDataError) as info:
        read_csv(path)
    assert info.value.line == line


def test_csv_error_line_across_blocks(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,v\n1,2\n\n3,4\n5,x\n")
    with pytest.raises(InvalidDataError) as info:
        list(iter_csv_blocks(path, header=True, block_size=1))
    assert info.value.line == 5


def test_empty_csv(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("x,y\n")
    with pytest.raises(InvalidDataError):
        read_csv(path, header=True)


def test_setup_logger_writes_file(tmp_path):
    log_file = tmp_path / "logs" / "bandgp.log"
    setup_logger(log_level="DEBUG", log_file=log_file)
    logger.debug("file message")
    logger.remove()
    assert "file message" in log_file.read_text()


def test_settings_defaults(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    settings = BandGPSettings()
    assert settings.num_basis == 100
    assert settings.kernel is Family.MATERN32
    assert settings.structure is Structure.ONE_D
    monkeypatch.setenv("BANDGP_STRUCTURE", "additive")
    assert BandGPSettings().structure is Structure.ADDITIVE


def test_linear_r2():
    assert linear_r2([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
    assert np.isnan(linear_r2([1, 2], [1, 2]))


def test_write_bench_csv(tmp_path):
    path = tmp_path / "bench.csv"
    write_csv([BenchRow("elbo", 100, 16, 0.5)], path)
    assert list(csv.reader(path.open())) == [["kind", "n", "m", "seconds"], ["elbo", "100", "16", "0.5"]]


def test_timings_report_the_median(mocker):
    clock = mocker.patch.object(bandgp.bench, "time")
    clock.perf_counter.side_effect = [0.0, 1.0, 10.0, 10.5, 20.0, 23.0]
    assert bandgp.bench._timed(lambda: None, repeats=3) == 1.0


def test_time_chol_row():
    row = time_chol(256, Family.MATERN32, repeats=2)
    assert (row.kind, row.n, row.m) == ("chol", 0, 256)
    assert row.seconds > 0


def test_write_spatial_csv(tmp_path):
    path = tmp_path / "spatial.csv"
    write_csv([SpatialRow(0.1, 16, -1.5, 0.25, 0.01)], path)
    assert next(csv.reader(path.open())) == ["lengthscale", "m", "nlpd_mean", "nlpd_std", "mse_mean"]


def test_spatial_nlpd_improves_with_basis_size():
    rows = run_spatial(m_values=[8, 16], lengthscales=[0.1], repeats=2, grid_size=20)
    assert [(row.lengthscale, row.m) for row in rows] == [(0.1, 8), (0.1, 16)]
    assert all(np.isfinite([row.nlpd_mean, row.nlpd_std, row.mse_mean]).all() for row in rows)
    assert rows[1].nlpd_mean < rows[0].nlpd_mean
