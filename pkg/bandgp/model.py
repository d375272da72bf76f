"""Collapsed ELBO, optimal variational posterior and prediction.

With ``s = σ_n²``, ``K = K_uu`` and ``M_b = K + A / s`` the collapsed bound is

    L = -½ [N log 2π + N log s + log|M_b| - log|K| + c / s - bᵀ M_b⁻¹ b / s²] - (N κ - tr(K⁻¹ A)) / (2 s)

and the optimal posterior over the inducing features has mean ``m̂ = K M_b⁻¹ b / s``. Everything is
computed from the statistics ``(A, b, c, N)`` and banded factors of ``K`` and ``M_b``, so one
evaluation costs ``O(M w²)`` for band width ``w`` whatever the data size.

Additive features couple dimensions through ``A``; those models go through dense factorizations
of ``M_b`` instead.

Example:
    >>> comp = gram_components(basis, Family.MATERN32)
    >>> hyper = MaternHyper.create(Family.MATERN32, lengthscale=10.0, amplitude=1.0, noise=0.1)
    >>> collapsed_elbo(stats, comp, hyper)
    -1234.5
    >>> fit = finalize(stats, comp, hyper, bases=[basis])
    >>> mean, variance = predict(fit, x_test)
"""

import math
from dataclasses import dataclass
from typing import Any
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
from loguru import logger
from scipy import linalg
from scipy.stats import norm

from bandgp.banded import LowerBand
from bandgp.banded import SymBand
from bandgp.banded import band_axpby
from bandgp.banded import band_trace_product
from bandgp.banded import block_diag_band
from bandgp.banded import chol
from bandgp.banded import chol_product
from bandgp.banded import cho_solve
from bandgp.banded import inverse_band_subset
from bandgp.banded import kron_band
from bandgp.banded import logdet_from_chol
from bandgp.banded import solve_lower
from bandgp.constants import FD_STEP
from bandgp.constants import JITTER_GROWTH
from bandgp.constants import JITTER_MAX
from bandgp.constants import JITTER_START
from bandgp.constants import VARIANCE_FLOOR
from bandgp.constants import Structure
from bandgp.design import Stats
from bandgp.design import bases_fingerprint
from bandgp.design import combine_fingerprints
from bandgp.design import feature_rows
from bandgp.exceptions import DimensionMismatchError
from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import InvalidDataError
from bandgp.exceptions import NotPositiveDefiniteError
from bandgp.rkhs_gram import GramComponents
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import as_components
from bandgp.rkhs_gram import assemble_kuu
from bandgp.splines import SplineBasis
from bandgp.utils import check_finite


LOG_2PI = math.log(2.0 * math.pi)

Matrix = Union[SymBand, np.ndarray]
Factor = Union[LowerBand, np.ndarray]


class _Factorization(NamedTuple):
    kuu: Matrix
    chol_kuu: Factor
    chol_mb: Factor
    jitter: float


@dataclass(frozen=True, eq=False)
class FitResult:
    """Finalized model: hyperparameters, statistics and the factors prediction needs.

    Attributes:
        hyper: Trained hyperparameters.
        structure: Feature structure.
        bases: One spline basis per input dimension (normalized coordinates).
        comps: Gram components matching ``bases``.
        stats: Sufficient statistics of the training data.
        kuu: ``K_uu`` without jitter (banded, or dense for additive features).
        chol_kuu: Cholesky factor of ``K_uu + jitter·I``.
        chol_mb: Cholesky factor of ``K_uu + A / σ_n² + jitter·I``.
        vhat: ``M_b⁻¹ b``.
        jitter: Diagonal jitter the factorizations needed.
        transform: Optional map from raw inputs to normalized coordinates (anything with ``apply``).
    """

    hyper: MaternHyper
    structure: Structure
    bases: tuple[SplineBasis, ...]
    comps: tuple[GramComponents, ...]
    stats: Stats
    kuu: Matrix
    chol_kuu: Factor
    chol_mb: Factor
    vhat: np.ndarray
    jitter: float
    transform: Optional[Any] = None

    @property
    def kappa(self) -> float:
        """Prior variance ``k(x, x)``."""
        return prior_variance(self.structure, self.hyper)

    @property
    def m_hat(self) -> np.ndarray:
        """Posterior mean of the inducing features, ``K_uu vhat / σ_n²``."""
        return _matvec(self.kuu, self.vhat) / self.hyper.noise

    def predict_latent(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Marginal mean and variance of the latent function at ``X``."""
        return predict(self, X)

    def check(self, rtol: float = 1e-10, residual_tol: float = 1e-8):
        """Verify the stored factors against ``K_uu`` and the statistics.

        Raises:
            InvalidConfigurationError: If ``chol_mb`` does not reconstruct ``M_b`` or ``vhat`` does
                not solve ``M_b vhat = b``.
        """
        mb = _shifted_mb(self.kuu, self.stats.A, self.hyper.noise, self.jitter)
        if isinstance(mb, SymBand):
            rebuilt, target = chol_product(self.chol_mb).data, mb.widened(self.chol_mb.width).data
            residual = mb.matvec(self.vhat) - self.stats.b
        else:
            rebuilt, target = self.chol_mb @ self.chol_mb.T, mb
            residual = mb @ self.vhat - self.stats.b
        scale = max(1.0, float(np.max(np.abs(target))))
        error = float(np.max(np.abs(rebuilt - target)))
        if error > rtol * scale:
            raise InvalidConfigurationError(f"cholesky factor of M_b is off by {error:.3g}")
        bound = residual_tol * float(np.linalg.norm(self.stats.b))
        if float(np.linalg.norm(residual)) > bound:
            raise InvalidConfigurationError(f"vhat residual {np.linalg.norm(residual):.3g} exceeds {bound:.3g}")


def prior_variance(structure: Structure, hyper: MaternHyper) -> float:
    """Prior variance ``κ = k(x, x)`` of the (product or sum) kernel."""
    structure = Structure(structure)
    if structure is Structure.SEPARABLE_2D:
        return float(np.prod(hyper.amplitudes))
    if structure is Structure.ADDITIVE:
        return float(np.sum(hyper.amplitudes))
    return float(hyper.amplitudes[0])


def build_kuu(structure: Structure, comps, hyper: MaternHyper) -> SymBand:
    """``K_uu`` for any structure: a single block, a Kronecker product or a block diagonal."""
    structure = Structure(structure)
    comps = as_components(comps)
    _check_dims(structure, comps, hyper)
    blocks = [assemble_kuu(comp, hyper, d) for d, comp in enumerate(comps)]
    if structure is Structure.ONE_D:
        return blocks[0]
    if structure is Structure.SEPARABLE_2D:
        return kron_band(blocks[0], blocks[1])
    return block_diag_band(blocks)


def jitter_ladder(scale: float) -> list[float]:
    """Diagonal shifts tried in order: zero, then ``1e-10 · scale`` growing tenfold to ``1e-4 · scale``."""
    steps = int(round(math.log(JITTER_MAX / JITTER_START, JITTER_GROWTH)))
    return [0.0] + [scale * JITTER_START * JITTER_GROWTH**i for i in range(steps + 1)]


def collapsed_elbo(stats: Stats, comp, hyper: MaternHyper) -> float:
    """Collapsed evidence lower bound of the data summarized by ``stats``.

    Args:
        stats: Sufficient statistics.
        comp: Gram components (one per dimension) built from the same bases as ``stats``.
        hyper: Hyperparameters.

    Returns:
        float: The bound; ``0.0`` for empty statistics.

    Raises:
        NotPositiveDefiniteError: If the jitter ladder is exhausted.
    """
    comps = _check_inputs(stats, comp, hyper)
    if stats.n == 0:
        return 0.0
    state = _factorize(build_kuu(stats.structure, comps, hyper), stats.A, hyper.noise)
    return _elbo(stats, hyper, state)


def elbo_gradient(stats: Stats, comp, hyper: MaternHyper, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient over the free log-parameters (order of ``MaternHyper.to_vector``).

    A step that would push the noise below its floor falls back to a forward difference.
    """
    structure = stats.structure
    theta = hyper.to_vector(structure)
    grad = np.empty_like(theta)
    centre = None
    for i in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[i] += step
        down[i] -= step
        f_up = collapsed_elbo(stats, comp, _from_vector(up, hyper, structure))
        try:
            lower = _from_vector(down, hyper, structure)
        except InvalidConfigurationError:
            if centre is None:
                centre = collapsed_elbo(stats, comp, hyper)
            grad[i] = (f_up - centre) / step
            continue
        grad[i] = (f_up - collapsed_elbo(stats, comp, lower)) / (2.0 * step)
    return grad


def finalize(
    stats: Stats,
    comp,
    hyper: MaternHyper,
    bases: Optional[Sequence[SplineBasis]] = None,
    transform: Optional[Any] = None,
) -> FitResult:
    """Factorize ``K_uu`` and ``M_b`` and solve for ``vhat``.

    Args:
        stats: Sufficient statistics.
        comp: Gram components.
        hyper: Hyperparameters.
        bases: Bases the statistics were built from; required for prediction.
        transform: Optional input transform stored on the result.

    Raises:
        NotPositiveDefiniteError: If the jitter ladder is exhausted.
        InvalidConfigurationError: If ``bases`` do not match the statistics.
    """
    comps = _check_inputs(stats, comp, hyper)
    bases = tuple(bases or ())
    if bases and bases_fingerprint(stats.structure, bases) != stats.fingerprint:
        raise InvalidConfigurationError("bases do not match the statistics")
    state = _factorize(build_kuu(stats.structure, comps, hyper), stats.A, hyper.noise)
    vhat = _solve(state.chol_mb, stats.b)
    logger.debug(f"finalized {stats.structure.value} posterior: dim={stats.dim} n={stats.n} jitter={state.jitter:g}")
    return FitResult(
        hyper=hyper,
        structure=stats.structure,
        bases=bases,
        comps=comps,
        stats=stats,
        kuu=state.kuu,
        chol_kuu=state.chol_kuu,
        chol_mb=state.chol_mb,
        vhat=vhat,
        jitter=state.jitter,
        transform=transform,
    )


def predict(fit: FitResult, X) -> tuple[np.ndarray, np.ndarray]:
    """Marginal predictive mean and latent variance at query points.

    ``mean = φᵀ M_b⁻¹ b / s`` and ``variance = κ - φᵀ K⁻¹ φ + φᵀ M_b⁻¹ φ``, where ``φ`` is the
    query's column of ``K_uf``. Points outside the domain get the prior ``(0, κ)``.

    Raises:
        InvalidDataError: On non-finite queries.
        InvalidConfigurationError: If the fit carries no bases.
    """
    if not fit.bases:
        raise InvalidConfigurationError("fit has no bases; pass them to finalize to enable prediction")
    X = check_finite(X, "queries")
    if X.ndim == 1:
        X = X[:, None]
    if fit.transform is not None:
        X = fit.transform.apply(X)
    indices, values = feature_rows(fit.structure, fit.bases, X)
    n, dim = len(indices), fit.stats.dim
    mean = np.sum(values * fit.vhat[indices], axis=1) / fit.hyper.noise
    reduction = np.zeros(n)
    block = max(1, min(4096, 2**22 // dim))
    for start in range(0, n, block):
        stop = min(start + block, n)
        phi = np.zeros((dim, stop - start))
        phi[indices[start:stop], np.arange(stop - start)[:, None]] = values[start:stop]
        prior_part = np.sum(_forward(fit.chol_kuu, phi) ** 2, axis=0)
        posterior_part = np.sum(_forward(fit.chol_mb, phi) ** 2, axis=0)
        reduction[start:stop] = prior_part - posterior_part
    variance = np.maximum(fit.kappa - reduction, VARIANCE_FLOOR)
    return mean, variance


def metrics(y_true, mean, variance, hyper: MaternHyper) -> tuple[float, float]:
    """Mean squared error and negative log predictive density.

    The predictive density of each target is ``N(y | mean, variance + σ_n²)``, with the latent
    variance clamped below at ``VARIANCE_FLOOR``.
    """
    y_true = check_finite(y_true, "targets").ravel()
    mean = check_finite(mean, "mean").ravel()
    variance = check_finite(variance, "variance").ravel()
    if not len(y_true) == len(mean) == len(variance):
        raise DimensionMismatchError(f"lengths differ: {len(y_true)}, {len(mean)}, {len(variance)}")
    if len(y_true) == 0:
        raise InvalidDataError("metrics need at least one target")
    scale = np.sqrt(np.maximum(variance, VARIANCE_FLOOR) + hyper.noise)
    mse = float(np.mean((y_true - mean) ** 2))
    nlpd = float(-np.mean(norm.logpdf(y_true, loc=mean, scale=scale)))
    return mse, nlpd


def _elbo(stats: Stats, hyper: MaternHyper, state: _Factorization) -> float:
    n, s = stats.n, hyper.noise
    vhat = _solve(state.chol_mb, stats.b)
    data_fit = (
        n * LOG_2PI
        + n * math.log(s)
        + _logdet(state.chol_mb)
        - _logdet(state.chol_kuu)
        + stats.c / s
        - float(stats.b @ vhat) / s**2
    )
    trace = _trace_kinv_a(state.chol_kuu, stats.A)
    return -0.5 * data_fit - (n * prior_variance(stats.structure, hyper) - trace) / (2.0 * s)


def _check_dims(structure: Structure, comps: tuple, hyper: MaternHyper):
    expected = {Structure.ONE_D: 1, Structure.SEPARABLE_2D: 2}.get(structure, len(comps))
    if len(comps) != expected:
        raise InvalidConfigurationError(f"{structure.value} features take {expected} component sets, got {len(comps)}")
    if hyper.num_dims != len(comps):
        raise DimensionMismatchError(f"hyperparameters cover {hyper.num_dims} dimensions, components {len(comps)}")


def _check_inputs(stats: Stats, comp, hyper: MaternHyper) -> tuple[GramComponents, ...]:
    comps = as_components(comp)
    _check_dims(stats.structure, comps, hyper)
    if combine_fingerprints(stats.structure, [c.fingerprint for c in comps]) != stats.fingerprint:
        raise InvalidConfigurationError("statistics and gram components were built from different bases")
    return comps


def _from_vector(theta: np.ndarray, hyper: MaternHyper, structure: Structure) -> MaternHyper:
    return MaternHyper.from_vector(theta, hyper.family, structure, hyper.num_dims)


def _shifted_mb(kuu: Matrix, A: Matrix, noise: float, jitter: float) -> Matrix:
    if isinstance(A, SymBand):
        return band_axpby(1.0, kuu, 1.0 / noise, A).add_diagonal(jitter)
    return kuu + A / noise + jitter * np.eye(kuu.shape[0])


def _factor(matrix: Matrix, jitter: float) -> Factor:
    if isinstance(matrix, SymBand):
        return chol(matrix.add_diagonal(jitter))
    try:
        return linalg.cholesky(matrix + jitter * np.eye(matrix.shape[0]), lower=True)
    except linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"dense cholesky failed: {e}", jitter=jitter) from e


def _factorize(kuu: SymBand, A: Matrix, noise: float) -> _Factorization:
    """Factor ``K`` and ``M_b`` with the smallest ladder jitter that works for both."""
    K = kuu if isinstance(A, SymBand) else kuu.to_dense()
    mb = _shifted_mb(K, A, noise, 0.0)
    diag = K.diagonal() if isinstance(K, SymBand) else np.diag(K)
    failure: Optional[NotPositiveDefiniteError] = None
    jitter = 0.0
    for jitter in jitter_ladder(float(np.mean(diag))):
        try:
            chol_kuu, chol_mb = _factor(K, jitter), _factor(mb, jitter)
        except NotPositiveDefiniteError as e:
            failure = e
            logger.debug(f"cholesky failed at jitter {jitter:.3g} (pivot {e.pivot})")
            continue
        if jitter > 0:
            logger.warning(f"factorization needed jitter {jitter:.3g}")
        return _Factorization(kuu=K, chol_kuu=chol_kuu, chol_mb=chol_mb, jitter=jitter)
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite even with jitter {jitter:.3g}",
        pivot=failure.pivot if failure else None,
        jitter=jitter,
    )


def _solve(factor: Factor, v: np.ndarray) -> np.ndarray:
    if isinstance(factor, LowerBand):
        return cho_solve(factor, v)
    return linalg.cho_solve((factor, True), v)


def _forward(factor: Factor, v: np.ndarray) -> np.ndarray:
    if isinstance(factor, LowerBand):
        return solve_lower(factor, v)
    return linalg.solve_triangular(factor, v, lower=True)


def _logdet(factor: Factor) -> float:
    if isinstance(factor, LowerBand):
        return logdet_from_chol(factor)
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def _trace_kinv_a(chol_kuu: Factor, A: Matrix) -> float:
    # A is zero outside the band of K, so the in-band part of K⁻¹ suffices
    if isinstance(chol_kuu, LowerBand):
        return band_trace_product(inverse_band_subset(chol_kuu), A)
    return float(np.trace(linalg.cho_solve((chol_kuu, True), A)))


def _matvec(matrix: Matrix, v: np.ndarray) -> np.ndarray:
    if isinstance(matrix, SymBand):
        return matrix.matvec(v)
    return matrix @ v
