"""Builders shared by several test modules."""

import numpy as np

from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.design import precompute_stats
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import gram_components
from bandgp.splines import make_uniform_basis


def random_spd_band(rng, dim: int, width: int) -> np.ndarray:
    """Dense symmetric, diagonally dominant matrix with ``width - 1`` nonzero sub-diagonals."""
    dense = np.zeros((dim, dim))
    for d in range(1, width):
        values = rng.uniform(-1.0, 1.0, dim - d)
        idx = np.arange(dim - d)
        dense[idx + d, idx] = values
        dense[idx, idx + d] = values
    dense[np.diag_indices(dim)] = np.abs(dense).sum(axis=1) + rng.uniform(0.5, 2.0, dim)
    return dense


def regression_problem(rng, family: Family, num_basis: int = 16, n: int = 200):
    """Noisy smooth data on ``[0, num_basis]`` with matching basis, statistics and components."""
    basis = make_uniform_basis((0.0, float(num_basis)), num_basis, family.order)
    x = rng.uniform(0.0, num_basis, n)
    y = np.sin(x / 2.0) + 0.1 * rng.standard_normal(n)
    return basis, x, y, precompute_stats(basis, x, y), gram_components(basis, family)


def random_hyper(rng, family: Family, num_dims: int = 1, scale: float = 16.0) -> MaternHyper:
    return MaternHyper.create(
        family,
        lengthscale=scale * rng.uniform(0.05, 0.5, num_dims),
        amplitude=rng.uniform(0.5, 2.0, num_dims),
        noise=float(rng.uniform(0.01, 0.3)),
    )


STRUCTURE_DIMS = {Structure.ONE_D: 1, Structure.SEPARABLE_2D: 2, Structure.ADDITIVE: 3}


def random_instance(rng, family: Family, structure: Structure):
    """Random bases, data and hyperparameters small enough for the dense references.

    Separable and additive bases keep at most 8 splines per dimension.
    """
    num_dims = STRUCTURE_DIMS[structure]
    max_basis = 16 if structure is Structure.ONE_D else 8
    widths = rng.uniform(4.0, 12.0, num_dims)
    bases = [
        make_uniform_basis((0.0, float(w)), int(rng.integers(family.order + 3, max_basis + 1)), family.order)
        for w in widths
    ]
    n = int(rng.integers(60, 250))
    X = rng.uniform(0.0, 1.0, (n, num_dims)) * widths
    y = np.sin(X @ (2.0 / widths)) + 0.1 * rng.standard_normal(n)
    amplitudes = rng.uniform(0.5, 2.0, num_dims)
    if structure is Structure.SEPARABLE_2D:
        amplitudes[1] = 1.0
    hyper = MaternHyper.create(
        family,
        lengthscale=widths * rng.uniform(0.05, 0.5, num_dims),
        amplitude=amplitudes,
        noise=float(rng.uniform(0.01, 0.3)),
    )
    if structure is Structure.ONE_D:
        X = X[:, 0]
    return bases, X, y, hyper
