"""Slow dense reference implementations for tests and acceptance runs.

Nothing here goes through the banded code paths: splines come from the closed-form cardinal
pieces of order 0 to 2, ``K_uu`` from composite Simpson quadrature of the state-space form of
the Matérn inner products, and every posterior quantity from dense matrices. The state-space
forms with ``λ = 1/ℓ`` (ν = 1/2) and ``λ = √3/ℓ`` (ν = 3/2) are

    ⟨f, g⟩ = 1/(2λσ²) ∫ (f' + λf)(g' + λg) + f(a) g(a) / σ²
    ⟨f, g⟩ = 1/(4λ³σ²) ∫ (λ²f + 2λf' + f'')(λ²g + 2λg' + g'') + f(a) g(a) / σ² + f'(a) g'(a) / (λ²σ²)

Example:
    >>> K = dense_kuu_quadrature(basis, hyper)
    >>> logml, mean, var = exact_gp(x, y, hyper, x_test=x)
"""

import math
from typing import NamedTuple
from typing import Optional
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.integrate import simpson
from scipy.stats import multivariate_normal

from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import InvalidOrderError
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import matern_kernel
from bandgp.splines import SplineBasis


EXACT_GP_MAX_POINTS = 3000
LITERAL_ELBO_MAX_POINTS = 500


class DenseSGPR(NamedTuple):
    """Dense SGPR bound, predictions and posterior moments."""

    elbo: float
    mean: np.ndarray
    variance: np.ndarray
    m_hat: np.ndarray


def cardinal_spline(basis: SplineBasis, m: int, x, r: int = 0) -> np.ndarray:
    """``r``-th derivative of basis function ``m`` from its closed-form polynomial pieces.

    Only orders 0 to 2 are available. Values are zero outside the domain.
    """
    k, h = basis.order, basis.spacing
    if k > 2:
        raise InvalidOrderError(f"closed forms cover orders 0 to 2, got {k}")
    if not 0 <= r <= k:
        raise InvalidOrderError(f"derivative order {r} not in [0, {k}]")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    a, b = basis.domain
    start = a + (m - k) * h
    t = (x - start) / h
    piece = np.floor(t).astype(int)
    # x = b belongs to the interval ending at b
    at_b = np.isclose(x, b, rtol=0.0, atol=1e-12 * max(1.0, abs(b)))
    piece = np.where(at_b, np.round(t).astype(int) - 1, piece)
    if k == 0:
        table = [[np.ones_like(t)]]
    elif k == 1:
        table = [[t, 2.0 - t], [np.ones_like(t), -np.ones_like(t)]]
    else:
        table = [
            [t**2 / 2.0, (-2.0 * t**2 + 6.0 * t - 3.0) / 2.0, (3.0 - t) ** 2 / 2.0],
            [t, 3.0 - 2.0 * t, t - 3.0],
            [np.ones_like(t), -2.0 * np.ones_like(t), np.ones_like(t)],
        ]
    out = np.zeros_like(t)
    for p in range(k + 1):
        hit = piece == p
        out[hit] = table[r][p][hit]
    out[(x < a) | (x > b)] = 0.0
    return out / h**r


def dense_design(basis: SplineBasis, x) -> np.ndarray:
    """Dense ``K_uf`` of shape ``(M, n)`` for one dimension."""
    return np.vstack([cardinal_spline(basis, m, x) for m in range(basis.num_basis)])


def dense_features(structure: Structure, bases: Sequence[SplineBasis], X) -> np.ndarray:
    """Dense ``K_uf`` for any structure; tensor-product rows are ordered ``i1 · M2 + i2``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    columns = [dense_design(basis, X[:, d]) for d, basis in enumerate(bases)]
    if Structure(structure) is Structure.SEPARABLE_2D:
        return np.einsum("in,jn->ijn", columns[0], columns[1]).reshape(-1, X.shape[0])
    return np.vstack(columns)


def _integrand_factors(basis: SplineBasis, x: np.ndarray, family: Family, lam: float) -> np.ndarray:
    rows = range(basis.num_basis)
    f = np.vstack([cardinal_spline(basis, m, x, 0) for m in rows])
    df = np.vstack([cardinal_spline(basis, m, x, 1) for m in rows])
    if family is Family.MATERN12:
        return df + lam * f
    d2f = np.vstack([cardinal_spline(basis, m, x, 2) for m in rows])
    return lam**2 * f + 2.0 * lam * df + d2f


def dense_kuu_quadrature(
    basis: SplineBasis, hyper: MaternHyper, dim: int = 0, subintervals: int = 10_000
) -> np.ndarray:
    """Dense ``K_uu`` of one dimension by composite Simpson quadrature on each knot interval."""
    family = hyper.family
    if basis.order != family.order:
        raise InvalidConfigurationError(f"{family.value} needs order {family.order}, basis has {basis.order}")
    ell, amp = float(hyper.lengthscales[dim]), float(hyper.amplitudes[dim])
    lam = 1.0 / ell if family is Family.MATERN12 else math.sqrt(3.0) / ell
    const = 1.0 / (2.0 * lam * amp) if family is Family.MATERN12 else 1.0 / (4.0 * lam**3 * amp)
    dim_m = basis.num_basis
    a, b = basis.domain
    edges = np.linspace(a, b, basis.n_intervals + 1)
    K = np.zeros((dim_m, dim_m))
    for left, right in zip(edges[:-1], edges[1:]):
        # sample strictly inside so every point sees one polynomial piece
        x = np.linspace(left, right, subintervals + 1)
        x[0], x[-1] = left + 1e-14 * (right - left), right - 1e-14 * (right - left)
        factors = _integrand_factors(basis, x, family, lam)
        active = np.flatnonzero(np.any(factors != 0.0, axis=1))
        grid = np.linspace(left, right, subintervals + 1)
        for i in active:
            K[i, active] += const * simpson(factors[i] * factors[active], x=grid, axis=-1)
    ends = np.array([a])
    f_a = np.array([cardinal_spline(basis, m, ends, 0)[0] for m in range(dim_m)])
    K += np.outer(f_a, f_a) / amp
    if family is Family.MATERN32:
        df_a = np.array([cardinal_spline(basis, m, ends, 1)[0] for m in range(dim_m)])
        K += np.outer(df_a, df_a) / (lam**2 * amp)
    return 0.5 * (K + K.T)


def dense_kuu(structure: Structure, bases: Sequence[SplineBasis], hyper: MaternHyper, **kwargs) -> np.ndarray:
    """Dense ``K_uu`` by quadrature for any structure."""
    blocks = [dense_kuu_quadrature(basis, hyper, d, **kwargs) for d, basis in enumerate(bases)]
    structure = Structure(structure)
    if structure is Structure.SEPARABLE_2D:
        return np.kron(blocks[0], blocks[1])
    if structure is Structure.ADDITIVE:
        return linalg.block_diag(*blocks)
    return blocks[0]


def kernel_matrix(structure: Structure, X1, X2, hyper: MaternHyper) -> np.ndarray:
    """Covariance of the product (separable) or sum (additive) of per-dimension Matérn kernels."""
    X1 = np.asarray(X1, dtype=np.float64).reshape(len(X1), -1)
    X2 = np.asarray(X2, dtype=np.float64).reshape(len(X2), -1)
    parts = [
        matern_kernel(X1[:, d], X2[:, d], hyper.family, hyper.lengthscales[d], hyper.amplitudes[d])
        for d in range(hyper.num_dims)
    ]
    if Structure(structure) is Structure.ADDITIVE:
        return np.sum(parts, axis=0)
    return np.prod(parts, axis=0)


def exact_gp(
    X, y, hyper: MaternHyper, structure: Structure = Structure.ONE_D, x_test=None
) -> tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    """Exact GP regression: log marginal likelihood and latent predictive mean and variance."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) > EXACT_GP_MAX_POINTS:
        raise InvalidConfigurationError(f"exact GP is limited to {EXACT_GP_MAX_POINTS} points")
    K = kernel_matrix(structure, X, X, hyper) + hyper.noise * np.eye(len(y))
    factor = linalg.cho_factor(K, lower=True)
    alpha = linalg.cho_solve(factor, y)
    logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
    logml = float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * len(y) * math.log(2.0 * math.pi))
    if x_test is None:
        return logml, None, None
    cross = kernel_matrix(structure, x_test, X, hyper)
    prior = np.diag(kernel_matrix(structure, x_test, x_test, hyper))
    mean = cross @ alpha
    variance = prior - np.sum(cross * linalg.cho_solve(factor, cross.T).T, axis=1)
    return logml, mean, variance


def exact_log_marginal_direct(X, y, hyper: MaternHyper, structure: Structure = Structure.ONE_D) -> float:
    """Second, independently coded log marginal likelihood."""
    y = np.asarray(y, dtype=np.float64).ravel()
    cov = kernel_matrix(structure, X, X, hyper) + hyper.noise * np.eye(len(y))
    return float(multivariate_normal(mean=np.zeros(len(y)), cov=cov).logpdf(y))


def dense_sgpr(
    X,
    y,
    bases: Sequence[SplineBasis],
    hyper: MaternHyper,
    structure: Structure = Structure.ONE_D,
    x_test=None,
    subintervals: int = 10_000,
) -> DenseSGPR:
    """Collapsed bound, optimal inducing mean and predictions with dense matrices.

    Inputs are in the bases' coordinates. Up to ``LITERAL_ELBO_MAX_POINTS`` points the bound is
    evaluated as an ``N``-dimensional Gaussian density; above that through dense ``M × M`` algebra.
    ``subintervals`` sets the quadrature resolution of ``K_uu`` on each knot interval.
    """
    structure = Structure(structure)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, s = len(y), hyper.noise
    K = dense_kuu(structure, bases, hyper, subintervals=subintervals)
    Kuf = dense_features(structure, bases, X) if n else np.zeros((K.shape[0], 0))
    kappa = float(np.diag(kernel_matrix(structure, np.zeros((1, len(bases))), np.zeros((1, len(bases))), hyper))[0])
    k_factor = linalg.cho_factor(K, lower=True)
    sigma = linalg.inv(K + Kuf @ Kuf.T / s)
    q_trace = float(np.trace(linalg.cho_solve(k_factor, Kuf @ Kuf.T))) if n else 0.0

    if n == 0:
        elbo = 0.0
    elif n <= LITERAL_ELBO_MAX_POINTS:
        Q = Kuf.T @ linalg.cho_solve(k_factor, Kuf)
        cov = Q + s * np.eye(n)
        elbo = float(multivariate_normal(mean=np.zeros(n), cov=cov).logpdf(y)) - (n * kappa - q_trace) / (2.0 * s)
    else:
        mb = K + Kuf @ Kuf.T / s
        _, logdet_mb = np.linalg.slogdet(mb)
        _, logdet_k = np.linalg.slogdet(K)
        b = Kuf @ y
        quad = y @ y / s - b @ np.linalg.solve(mb, b) / s**2
        elbo = float(
            -0.5 * (n * math.log(2.0 * math.pi * s) + logdet_mb - logdet_k + quad) - (n * kappa - q_trace) / (2.0 * s)
        )

    m_hat = K @ sigma @ Kuf @ y / s if n else np.zeros(K.shape[0])
    if x_test is None:
        return DenseSGPR(elbo=elbo, mean=np.empty(0), variance=np.empty(0), m_hat=m_hat)
    s_hat = K @ sigma @ K
    phi = dense_features(structure, bases, x_test)
    projected = linalg.cho_solve(k_factor, phi)
    mean = projected.T @ m_hat
    variance = kappa - np.sum(phi * projected, axis=0) + np.sum(projected * (s_hat @ projected), axis=0)
    return DenseSGPR(elbo=elbo, mean=mean, variance=variance, m_hat=m_hat)
