"""Synthetic data for experiments and benchmarks."""

import numpy as np
from scipy import linalg

from bandgp.exceptions import InvalidConfigurationError
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import matern_kernel


def synthetic_function(x) -> np.ndarray:
    """``sin(3πx) + 0.3 cos(9πx) + sin(7πx) / 2``."""
    x = np.asarray(x, dtype=np.float64)
    return np.sin(3 * np.pi * x) + 0.3 * np.cos(9 * np.pi * x) + 0.5 * np.sin(7 * np.pi * x)


def make_synthetic(n: int, noise_std: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` uniform inputs on ``[0, 1]`` with noisy targets of :func:`synthetic_function`."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=n)
    return x, synthetic_function(x) + noise_std * rng.standard_normal(n)


def train_test_split(X, y, test_fraction: float = 0.1, seed: int = 0):
    """Random split; returns ``(X_train, y_train, X_test, y_test)``."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidConfigurationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    X, y = np.asarray(X), np.asarray(y)
    order = np.random.default_rng(seed).permutation(len(y))
    n_test = max(1, int(round(test_fraction * len(y))))
    test, train = order[:n_test], order[n_test:]
    return X[train], y[train], X[test], y[test]


def sample_prior_1d(x, hyper: MaternHyper, seed: int = 0, with_noise: bool = True) -> np.ndarray:
    """One draw of ``f(x)`` (plus noise) from the exact one-dimensional Matérn prior."""
    x = np.asarray(x, dtype=np.float64).ravel()
    cov = matern_kernel(x, x, hyper.family, hyper.lengthscales[0], hyper.amplitudes[0])
    factor = linalg.cholesky(cov + 1e-10 * hyper.amplitudes[0] * np.eye(len(x)), lower=True)
    rng = np.random.default_rng(seed)
    draw = factor @ rng.standard_normal(len(x))
    if with_noise:
        draw = draw + np.sqrt(hyper.noise) * rng.standard_normal(len(x))
    return draw


def sample_prior_2d(
    grid_size: int, hyper: MaternHyper, seed: int = 0, with_noise: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """One draw from the separable (product) Matérn prior on a ``grid_size × grid_size`` grid of ``[0, 1]²``.

    The grid covariance is the Kronecker product of the two 1D covariances, so the draw is
    ``L1 Z L2ᵀ`` and never forms the full matrix.

    Args:
        grid_size: Points per axis.
        hyper: Two-dimensional hyperparameters; the amplitudes multiply.
        seed: Random seed.
        with_noise: Add observation noise of variance ``hyper.noise``.

    Returns:
        tuple: Inputs of shape ``(grid_size², 2)`` and the draws, row-major over the grid.
    """
    if hyper.num_dims != 2:
        raise InvalidConfigurationError(f"a 2d prior needs two lengthscales, got {hyper.num_dims}")
    if grid_size < 2:
        raise InvalidConfigurationError(f"grid_size must be at least 2, got {grid_size}")
    axis = np.linspace(0.0, 1.0, grid_size)
    factors = []
    for d in range(2):
        cov = matern_kernel(axis, axis, hyper.family, hyper.lengthscales[d], hyper.amplitudes[d])
        factors.append(linalg.cholesky(cov + 1e-10 * hyper.amplitudes[d] * np.eye(grid_size), lower=True))
    rng = np.random.default_rng(seed)
    draw = (factors[0] @ rng.standard_normal((grid_size, grid_size)) @ factors[1].T).ravel()
    if with_noise:
        draw = draw + np.sqrt(hyper.noise) * rng.standard_normal(draw.size)
    X = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    return X, draw
