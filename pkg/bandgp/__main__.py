"""Command-line interface for bandgp.

This module provides a command-line interface using Click to fit banded spline GP models,
predict with them, score predictions and benchmark the scaling of the statistics pass and the
ELBO. The CLI can be accessed either through the installed command 'bandgp' or by running the
module directly.

Example:
    Using the installed command (recommended):
        >>> # Fit a Matérn-3/2 model with 50 splines
        >>> bandgp fit --data train.csv --out model.json --num-basis 50
        >>> # Predict at new inputs
        >>> bandgp predict --model model.json --data test_x.csv --out pred.csv
        >>> # Score against held-out targets
        >>> bandgp eval --model model.json --data test.csv
        >>> # Show version
        >>> bandgp --version

    Using the Python module directly:
        >>> python -m bandgp fit --data train.csv --out model.json
        >>> python -m bandgp config show

Commands:
    fit: Train a model and write a model file
    predict: Stream predictive means and variances as CSV
    eval: Print MSE and NLPD as JSON
    bench: Time the statistics pass, ELBO evaluation and Cholesky
    spatial: NLPD against M on 2D prior samples with fixed hyperparameters
    config show: Display current configuration
    config init: Create a new .env file with default settings
"""

import csv
import functools
import json
import os
import sys
from importlib.metadata import version
from pathlib import Path
from typing import Optional

import click
import numpy as np
from loguru import logger

from bandgp.bench import SPATIAL_LENGTHSCALES
from bandgp.bench import run_bench
from bandgp.bench import run_spatial
from bandgp.bench import write_csv
from bandgp.config import BandGPSettings
from bandgp.constants import ENV_PREFIX
from bandgp.constants import REFERENCE_SYNTHETIC_MSE_E1
from bandgp.constants import REFERENCE_SYNTHETIC_NLPD
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.exceptions import BandGPError
from bandgp.exceptions import InvalidDataError
from bandgp.model import FitResult
from bandgp.model import metrics
from bandgp.model import predict as predict_points
from bandgp.modelfile import load_model
from bandgp.modelfile import save_model
from bandgp.optimize import FitConfig
from bandgp.optimize import Trainer
from bandgp.utils import iter_csv_blocks
from bandgp.utils import read_csv
from bandgp.utils import setup_logger


try:
    __version__ = version("bandgp")
except Exception:
    # package not installed
    __version__ = "0.0.0.dev0"


def logging_options(command):
    """Add ``--log-level`` and ``--log-file`` and configure the logger before running."""

    @click.option(
        "--log-level",
        type=click.Choice(["TRACE", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]),
        default=None,
        help="Set the logging level. Defaults to BANDGP_LOG_LEVEL or INFO.",
    )
    @click.option(
        "--log-file",
        type=click.Path(),
        help="Log file path. If not specified, logs will only go to console.",
    )
    @functools.wraps(command)
    def wrapper(*args, log_level: Optional[str], log_file: Optional[str], **kwargs):
        setup_logger(log_level=log_level or BandGPSettings().log_level, log_file=log_file)
        try:
            return command(*args, **kwargs)
        except BandGPError as e:
            logger.error(f"{type(e).__name__}: {e}")
            raise click.ClickException(str(e)) from e

    return wrapper


def _split_columns(data: np.ndarray, num_inputs: Optional[int] = None):
    if data.shape[1] < 2:
        raise InvalidDataError("data needs at least one input column and one target column")
    if num_inputs is not None and data.shape[1] != num_inputs + 1:
        raise InvalidDataError(f"expected {num_inputs} input columns and a target, got {data.shape[1]} columns")
    return data[:, :-1], data[:, -1]


def _num_inputs(fit: FitResult) -> int:
    return len(fit.bases)


@click.group()
@click.version_option(version=__version__)
def cli():
    """bandgp - sparse variational GP regression with banded B-spline features."""
    pass


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Training CSV.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Model file to write.")
@click.option("--kernel", type=click.Choice([f.value for f in Family]), help="Matérn family.")
@click.option("--structure", type=click.Choice([s.value for s in Structure]), help="Multi-input structure.")
@click.option("--num-basis", type=int, help="Basis functions per input dimension.")
@click.option("--max-iters", type=int, help="Optimizer iteration cap.")
@click.option("--grad-tol", type=float, help="Gradient infinity-norm tolerance.")
@click.option("--seed", type=int, help="Seed recorded in the model file.")
@click.option("--num-shards", type=int, help="Parallel shards for the statistics pass.")
@click.option("--delimiter", help="CSV delimiter.")
@click.option("--header", is_flag=True, help="Skip the first CSV line.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Also write the report JSON here.")
@logging_options
def fit(
    data_path: str,
    out_path: str,
    kernel: Optional[str],
    structure: Optional[str],
    num_basis: Optional[int],
    max_iters: Optional[int],
    grad_tol: Optional[float],
    seed: Optional[int],
    num_shards: Optional[int],
    delimiter: Optional[str],
    header: bool,
    report_path: Optional[str],
):
    """Fit a model to CSV data (input columns, then the target) and write a model file.

    Options not given on the command line come from environment variables or defaults.
    """
    settings = BandGPSettings()
    config = FitConfig.from_settings(
        settings,
        family=kernel,
        structure=structure,
        num_basis=num_basis,
        max_iters=max_iters,
        grad_tol=grad_tol,
        seed=seed,
        num_shards=num_shards,
    )
    logger.info(f"Fitting with config: {config.model_dump()}")
    X, y = _split_columns(read_csv(data_path, delimiter=delimiter or settings.delimiter, header=header))
    trainer = Trainer(config)
    result = trainer.run(X, y)
    save_model(result, out_path, seed=config.seed)
    report = trainer.report.model_dump_json(indent=2)
    if report_path:
        Path(report_path).write_text(report, encoding="utf-8")
    click.echo(report)


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Query CSV.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Output CSV; stdout when omitted.")
@click.option("--delimiter", help="CSV delimiter.")
@click.option("--header", is_flag=True, help="Skip the first CSV line.")
@logging_options
def predict(model_path: str, data_path: str, out_path: Optional[str], delimiter: Optional[str], header: bool):
    """Write ``inputs..., mean, variance`` rows for every query row.

    Query files may carry a trailing target column; it is ignored.
    """
    delimiter = delimiter or BandGPSettings().delimiter
    result, _ = load_model(model_path)
    num_inputs = _num_inputs(result)
    handle = open(out_path, "w", newline="", encoding="utf-8") if out_path else sys.stdout
    try:
        writer = csv.writer(handle, delimiter=delimiter)
        rows = 0
        for block in iter_csv_blocks(data_path, delimiter=delimiter, header=header):
            if block.shape[1] not in (num_inputs, num_inputs + 1):
                raise InvalidDataError(f"query rows need {num_inputs} input columns, got {block.shape[1]}")
            inputs = block[:, :num_inputs]
            mean, variance = predict_points(result, inputs)
            writer.writerows(np.column_stack([inputs, mean, variance]).tolist())
            rows += len(block)
    finally:
        if out_path:
            handle.close()
    logger.info(f"predicted {rows} rows")


@cli.command(name="eval")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Test CSV.")
@click.option("--delimiter", help="CSV delimiter.")
@click.option("--header", is_flag=True, help="Skip the first CSV line.")
@click.option("--reference", is_flag=True, help="Include the published synthetic-benchmark numbers.")
@logging_options
def evaluate(model_path: str, data_path: str, delimiter: Optional[str], header: bool, reference: bool):
    """Print test MSE and NLPD as JSON."""
    result, _ = load_model(model_path)
    data = read_csv(data_path, delimiter=delimiter or BandGPSettings().delimiter, header=header)
    X, y = _split_columns(data, _num_inputs(result))
    mean, variance = predict_points(result, X)
    mse, nlpd = metrics(y, mean, variance, result.hyper)
    output = {"mse": mse, "nlpd": nlpd}
    if reference:
        output["reference"] = {"mse": REFERENCE_SYNTHETIC_MSE_E1 / 10.0, "nlpd": REFERENCE_SYNTHETIC_NLPD}
    click.echo(json.dumps(output, indent=2))


def _int_list(ctx, param, value: str) -> list[int]:
    try:
        return [int(float(item)) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from e


@cli.command()
@click.option("--n-values", default="10000,40000,160000", callback=_int_list, help="Data sizes to sweep.")
@click.option("--m-values", default="1024,4096,16384", callback=_int_list, help="Basis sizes to sweep.")
@click.option("--fixed-m", default=1000, type=int, help="Basis size for the data-size sweep.")
@click.option("--fixed-n", default=10_000, type=int, help="Data size for the basis-size sweep.")
@click.option("--kernel", type=click.Choice([f.value for f in Family]), default=Family.MATERN32.value)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Output CSV; stdout when omitted.")
@logging_options
def bench(
    n_values: list[int],
    m_values: list[int],
    fixed_m: int,
    fixed_n: int,
    kernel: str,
    seed: int,
    out_path: Optional[str],
):
    """Time the statistics pass against N and one ELBO evaluation against M and N."""
    rows = run_bench(n_values, m_values, family=Family(kernel), fixed_m=fixed_m, fixed_n=fixed_n, seed=seed)
    write_csv(rows, out_path)


def _float_list(ctx, param, value: str) -> list[float]:
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from e


@cli.command()
@click.option("--m-values", default="10,20,40,60", callback=_int_list, help="Splines per dimension to sweep.")
@click.option(
    "--lengthscales",
    default=",".join(str(v) for v in SPATIAL_LENGTHSCALES),
    callback=_float_list,
    help="Generating lengthscales on the unit square.",
)
@click.option("--repeats", default=5, type=click.IntRange(min=1), help="Prior samples per lengthscale.")
@click.option("--grid-size", default=60, type=click.IntRange(min=2), help="Grid points per axis.")
@click.option("--noise", default=0.01, type=click.FloatRange(min=0, min_open=True), help="Noise variance.")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Output CSV; stdout when omitted.")
@logging_options
def spatial(
    m_values: list[int],
    lengthscales: list[float],
    repeats: int,
    grid_size: int,
    noise: float,
    seed: int,
    out_path: Optional[str],
):
    """Test NLPD against M on separable Matérn-3/2 prior samples with fixed hyperparameters."""
    rows = run_spatial(m_values, lengthscales, repeats=repeats, grid_size=grid_size, noise=noise, seed=seed)
    write_csv(rows, out_path)


@cli.group()
def config():
    """Manage default settings."""
    pass


@config.command(name="show")
def show_config():
    """Show current configuration settings."""
    settings = BandGPSettings()
    click.echo("Current Configuration:")
    click.echo("-" * 50)

    click.echo("Environment Variables:")
    for key, value in os.environ.items():
        if key.startswith(ENV_PREFIX):
            click.echo(f"  {key}={value}")

    click.echo("\nEffective Settings:")
    for key, value in settings.model_dump(mode="json").items():
        click.echo(f"  {key}={value}")


@config.command(name="init")
@click.option(
    "--force",
    is_flag=True,
    help="Overwrite existing .env file",
)
def init_config(force: bool):
    """Initialize a new .env file with default settings."""
    env_file = Path(".env")

    if env_file.exists() and not force:
        raise click.ClickException(".env file already exists. Use --force to overwrite.")

    settings = BandGPSettings()
    with env_file.open("w") as f:
        for key, value in settings.model_dump(mode="json").items():
            env_key = f"{ENV_PREFIX}{key.upper()}"
            f.write(f"{env_key}={value}\n")

    click.echo(f"Created .env file at {env_file.absolute()}")


if __name__ == "__main__":
    cli()
