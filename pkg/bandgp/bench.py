"""Scaling and accuracy benchmarks.

Timing rows are ``(kind, n, m, seconds)`` with ``kind`` one of ``precompute`` (the statistics
pass), ``elbo`` (median time of one collapsed-ELBO evaluation after the pass), ``chol`` (median
time of one banded Cholesky of ``K_uu``) or ``fit`` (statistics pass plus training, end to end).

The spatial benchmark samples a separable Matérn-3/2 prior on the unit square at short
lengthscales, holds the hyperparameters at their true values and reports the test NLPD as the
number of splines per dimension grows.

Example:
    >>> rows = run_bench(n_values=[10_000, 40_000], m_values=[1024, 4096])
    >>> write_csv(rows, "bench.csv")
    >>> write_csv(run_spatial(m_values=[16, 32]), "spatial.csv")
"""

import csv
import sys
import time
from dataclasses import astuple
from dataclasses import dataclass
from dataclasses import fields
from pathlib import Path
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
from loguru import logger
from scipy.stats import linregress

from bandgp.banded import chol
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.datasets import make_synthetic
from bandgp.datasets import sample_prior_2d
from bandgp.datasets import train_test_split
from bandgp.design import precompute_stats
from bandgp.model import collapsed_elbo
from bandgp.model import metrics
from bandgp.model import predict
from bandgp.optimize import FitConfig
from bandgp.optimize import Trainer
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import assemble_kuu
from bandgp.rkhs_gram import gram_components
from bandgp.splines import make_uniform_basis


SPATIAL_LENGTHSCALES = (0.1, 0.05, 0.03)


@dataclass(frozen=True)
class BenchRow:
    """One timing: ``kind`` is ``precompute``, ``elbo``, ``chol`` or ``fit``."""

    kind: str
    n: int
    m: int
    seconds: float


@dataclass(frozen=True)
class SpatialRow:
    """Test metrics of fixed-hyperparameter fits at one lengthscale and basis size, over repeats."""

    lengthscale: float
    m: int
    nlpd_mean: float
    nlpd_std: float
    mse_mean: float


def _timed(func, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _problem(n: int, m: int, family: Family, seed: int):
    x, y = make_synthetic(n, seed=seed)
    basis = make_uniform_basis((0.0, float(m)), m, family.order)
    return basis, x * m, y


def _hyper(family: Family) -> MaternHyper:
    return MaternHyper.create(family, lengthscale=10.0, amplitude=1.0, noise=0.04)


def time_precompute(n: int, m: int, family: Family = Family.MATERN32, repeats: int = 3, seed: int = 0) -> BenchRow:
    """Median time of the statistics pass over ``n`` synthetic points with ``m`` splines."""
    basis, x, y = _problem(n, m, family, seed)
    return BenchRow("precompute", n, m, _timed(lambda: precompute_stats(basis, x, y), repeats))


def time_elbo(n: int, m: int, family: Family = Family.MATERN32, repeats: int = 5, seed: int = 0) -> BenchRow:
    """Median time of one collapsed-ELBO evaluation after the statistics pass."""
    basis, x, y = _problem(n, m, family, seed)
    stats = precompute_stats(basis, x, y)
    comp = gram_components(basis, family)
    hyper = _hyper(family)
    collapsed_elbo(stats, comp, hyper)
    return BenchRow("elbo", n, m, _timed(lambda: collapsed_elbo(stats, comp, hyper), repeats))


def time_chol(m: int, family: Family = Family.MATERN32, repeats: int = 5) -> BenchRow:
    """Median time of one banded Cholesky factorization of ``K_uu`` with ``m`` splines."""
    basis = make_uniform_basis((0.0, float(m)), m, family.order)
    kuu = assemble_kuu(gram_components(basis, family), _hyper(family))
    return BenchRow("chol", 0, m, _timed(lambda: chol(kuu), repeats))


def time_fit(n: int, m: int, family: Family = Family.MATERN32, max_iters: int = 100, seed: int = 0) -> BenchRow:
    """Wall time of one full fit (statistics pass and training) on ``n`` synthetic points."""
    x, y = make_synthetic(n, seed=seed)
    start = time.perf_counter()
    trainer = Trainer(FitConfig(num_basis=m, family=family, max_iters=max_iters))
    trainer.run(x, y)
    seconds = time.perf_counter() - start
    logger.info(f"fit n={n} m={m}: {seconds:.3f}s ({trainer.report.iterations} iterations)")
    return BenchRow("fit", n, m, seconds)


def linear_r2(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Coefficient of determination of a least-squares line through ``(xs, ys)``."""
    if len(xs) < 3:
        return float("nan")
    return float(linregress(xs, ys).rvalue ** 2)


def run_bench(
    n_values: Sequence[int],
    m_values: Sequence[int],
    family: Family = Family.MATERN32,
    fixed_m: int = 1000,
    fixed_n: int = 10_000,
    seed: int = 0,
) -> list[BenchRow]:
    """Sweep ``N`` (statistics pass and ELBO at ``fixed_m``) and ``M`` (ELBO at ``fixed_n`` and Cholesky)."""
    rows = []
    for n in n_values:
        rows.append(time_precompute(n, fixed_m, family, seed=seed))
        rows.append(time_elbo(n, fixed_m, family, seed=seed))
        logger.info(f"n={n}: precompute {rows[-2].seconds:.4f}s, elbo {rows[-1].seconds:.6f}s")
    for m in m_values:
        rows.append(time_elbo(fixed_n, m, family, seed=seed))
        rows.append(time_chol(m, family))
        logger.info(f"m={m}: elbo {rows[-2].seconds:.6f}s, chol {rows[-1].seconds:.6f}s")

    precompute_rows = [r for r in rows if r.kind == "precompute"]
    elbo_vs_m = [r for r in rows if r.kind == "elbo" and r.n == fixed_n and r.m in m_values]
    elbo_vs_n = [r for r in rows if r.kind == "elbo" and r.m == fixed_m and r.n in n_values]
    chol_rows = [r for r in rows if r.kind == "chol"]
    precompute_r2 = linear_r2([r.n for r in precompute_rows], [r.seconds for r in precompute_rows])
    logger.info(f"precompute vs n: R²={precompute_r2:.4f}")
    logger.info(f"elbo vs m: R²={linear_r2([r.m for r in elbo_vs_m], [r.seconds for r in elbo_vs_m]):.4f}")
    logger.info(f"chol vs m: R²={linear_r2([r.m for r in chol_rows], [r.seconds for r in chol_rows]):.4f}")
    if len(elbo_vs_n) >= 2:
        times = [r.seconds for r in elbo_vs_n]
        logger.info(f"elbo time spread across n: max/min={max(times) / min(times):.3f}")
    return rows


def run_spatial(
    m_values: Sequence[int],
    lengthscales: Sequence[float] = SPATIAL_LENGTHSCALES,
    repeats: int = 5,
    grid_size: int = 60,
    amplitude: float = 1.0,
    noise: float = 0.01,
    seed: int = 0,
) -> list[SpatialRow]:
    """Test NLPD against basis size on separable Matérn-3/2 prior samples.

    Each repeat draws a fresh sample on the grid, holds out 10% of the points and fits with the
    hyperparameters fixed at the generating values.

    Args:
        m_values: Splines per dimension.
        lengthscales: Generating lengthscales on the unit square, shared by both axes.
        repeats: Prior samples per lengthscale.
        grid_size: Grid points per axis.
        amplitude: Generating signal variance.
        noise: Generating noise variance.
        seed: Seed of the first sample; repeat ``r`` uses ``seed + r``.

    Returns:
        list[SpatialRow]: One row per ``(lengthscale, m)``.
    """
    family = Family.MATERN32
    rows = []
    for lengthscale in lengthscales:
        truth = MaternHyper.create(family, [lengthscale, lengthscale], [amplitude, 1.0], noise)
        splits = []
        for r in range(repeats):
            X, y = sample_prior_2d(grid_size, truth, seed=seed + r)
            splits.append(train_test_split(X, y, seed=seed + r))
        for m in m_values:
            config = FitConfig(num_basis=m, family=family, structure=Structure.SEPARABLE_2D, train=False)
            nlpds, mses = [], []
            for X_train, y_train, X_test, y_test in splits:
                result = Trainer(config).run(X_train, y_train, hyper=truth)
                mse, nlpd = metrics(y_test, *predict(result, X_test), result.hyper)
                nlpds.append(nlpd)
                mses.append(mse)
            row = SpatialRow(lengthscale, m, float(np.mean(nlpds)), float(np.std(nlpds)), float(np.mean(mses)))
            logger.info(f"lengthscale={lengthscale} m={m}: nlpd={row.nlpd_mean:.4f} ± {row.nlpd_std:.4f}")
            rows.append(row)
    return rows


def write_csv(rows: Sequence, path: Optional[Union[str, Path]] = None):
    """Write dataclass rows under a header of their field names to ``path`` or stdout."""
    columns = [f.name for f in fields(rows[0] if rows else BenchRow)]
    handle = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(astuple(row))
    finally:
        if path:
            handle.close()
