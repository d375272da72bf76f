"""Matérn RKHS Gram matrices of B-spline features.

``K_uu[i, j] = <B_i, B_j>_H`` is a fixed linear combination of hyperparameter-free components
(integrals of products of spline derivatives over ``[a, b]`` and boundary products), so a basis
is integrated once and every later ``K_uu(θ)`` is a few banded axpy operations.

Inner products on ``[a, b]`` (``λ = √3 / ℓ`` for Matérn-3/2)::

    Matérn-1/2: ℓ/(2σ²) ∫f'g' + 1/(2ℓσ²) ∫fg + 1/(2σ²) [fg](a, b)
    Matérn-3/2: ℓ³/(12√3σ²) ∫f''g'' + ℓ/(2√3σ²) ∫f'g' + √3/(4ℓσ²) ∫fg
                + 1/(2σ²) [fg](a, b) + ℓ²/(6σ²) [f'g'](a, b)
                + ℓ/(2√3σ²) · ½ ((fg' + f'g)(b) - (fg' + f'g)(a))

where ``[fg](a, b) = f(a)g(a) + f(b)g(b)``.

Example:
    >>> basis = make_uniform_basis((0.0, 64.0), num_basis=66, order=2)
    >>> comp = gram_components(basis, Family.MATERN32)
    >>> hyper = MaternHyper.create(Family.MATERN32, lengthscale=5.0, amplitude=1.0, noise=0.1)
    >>> kuu = assemble_kuu(comp, hyper)
"""

import math
from dataclasses import dataclass
from typing import Optional
from typing import Sequence

import numpy as np
from loguru import logger
from numpy.polynomial.legendre import leggauss

from bandgp.banded import SymBand
from bandgp.banded import band_combination
from bandgp.constants import NOISE_FLOOR
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.exceptions import InvalidConfigurationError
from bandgp.splines import SplineBasis


SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class MaternHyper:
    """Kernel hyperparameters, stored as logs.

    One lengthscale per input dimension. Amplitudes are per dimension as well; for a separable
    kernel every amplitude after the first is pinned to one.

    Attributes:
        family: Matérn family.
        log_lengthscales: ``log ℓ_d``.
        log_amplitudes: ``log σ²_{f,d}``.
        log_noise: ``log σ_n²``; the noise variance is at least ``NOISE_FLOOR``.
    """

    family: Family
    log_lengthscales: tuple[float, ...]
    log_amplitudes: tuple[float, ...]
    log_noise: float

    def __post_init__(self):
        """Check shapes, finiteness and the noise floor."""
        if len(self.log_lengthscales) != len(self.log_amplitudes):
            raise InvalidConfigurationError("one lengthscale and one amplitude per dimension are required")
        values = (*self.log_lengthscales, *self.log_amplitudes, self.log_noise)
        if not all(np.isfinite(values)):
            raise InvalidConfigurationError(f"non-finite hyperparameter in {values}")
        if self.noise < NOISE_FLOOR * (1.0 - 1e-9):
            raise InvalidConfigurationError(f"noise variance {self.noise:g} is below the floor {NOISE_FLOOR:g}")

    @classmethod
    def create(cls, family: Family, lengthscale, amplitude, noise: float) -> "MaternHyper":
        """Build from natural-scale values; scalars mean a single dimension."""
        lengthscales = np.atleast_1d(np.asarray(lengthscale, dtype=np.float64))
        amplitudes = np.atleast_1d(np.asarray(amplitude, dtype=np.float64))
        if np.any(lengthscales <= 0) or np.any(amplitudes <= 0) or noise <= 0:
            raise InvalidConfigurationError("hyperparameters must be positive")
        return cls(
            family=Family(family),
            log_lengthscales=tuple(float(v) for v in np.log(lengthscales)),
            log_amplitudes=tuple(float(v) for v in np.log(amplitudes)),
            log_noise=float(np.log(noise)),
        )

    @property
    def num_dims(self) -> int:
        """Number of input dimensions."""
        return len(self.log_lengthscales)

    @property
    def lengthscales(self) -> np.ndarray:
        """``ℓ_d``."""
        return np.exp(self.log_lengthscales)

    @property
    def amplitudes(self) -> np.ndarray:
        """``σ²_{f,d}``."""
        return np.exp(self.log_amplitudes)

    @property
    def noise(self) -> float:
        """``σ_n²``."""
        return float(np.exp(self.log_noise))

    def to_vector(self, structure: Structure) -> np.ndarray:
        """Free log-parameters in optimizer order: lengthscales, amplitudes, noise."""
        amplitudes = self.log_amplitudes[:1] if structure is Structure.SEPARABLE_2D else self.log_amplitudes
        return np.array([*self.log_lengthscales, *amplitudes, self.log_noise])

    @classmethod
    def from_vector(cls, vector, family: Family, structure: Structure, num_dims: int) -> "MaternHyper":
        """Inverse of :meth:`to_vector`."""
        vector = np.asarray(vector, dtype=np.float64)
        lengthscales = tuple(float(v) for v in vector[:num_dims])
        if structure is Structure.SEPARABLE_2D:
            amplitudes = (float(vector[num_dims]),) + (0.0,) * (num_dims - 1)
        else:
            amplitudes = tuple(float(v) for v in vector[num_dims : 2 * num_dims])
        return cls(
            family=family, log_lengthscales=lengthscales, log_amplitudes=amplitudes, log_noise=float(vector[-1])
        )

    def parameter_names(self, structure: Structure) -> list[str]:
        """Names of the free log-parameters in :meth:`to_vector` order."""
        names = [f"log_lengthscale_{d}" for d in range(self.num_dims)]
        if structure is Structure.SEPARABLE_2D:
            names.append("log_amplitude")
        else:
            names.extend(f"log_amplitude_{d}" for d in range(self.num_dims))
        return [*names, "log_noise"]


@dataclass(frozen=True)
class GramComponents:
    """Hyperparameter-free pieces of ``K_uu`` for one basis, all of width ``k + 1``.

    Attributes:
        family: Family the components were built for.
        p0: ``∫ B_i B_j``.
        p1: ``∫ B_i' B_j'``.
        pb0: ``B_i(a) B_j(a) + B_i(b) B_j(b)``.
        p2: ``∫ B_i'' B_j''`` (Matérn-3/2 only).
        pb1: ``B_i'(a) B_j'(a) + B_i'(b) B_j'(b)`` (Matérn-3/2 only).
        pbx: ``½ ((B_i B_j' + B_i' B_j)(b) - (B_i B_j' + B_i' B_j)(a))`` (Matérn-3/2 only).
        fingerprint: Fingerprint of the basis.
    """

    family: Family
    p0: SymBand
    p1: SymBand
    pb0: SymBand
    p2: Optional[SymBand] = None
    pb1: Optional[SymBand] = None
    pbx: Optional[SymBand] = None
    fingerprint: str = ""

    @property
    def dim(self) -> int:
        """Number of splines."""
        return self.p0.dim


def gram_components(basis: SplineBasis, family: Family) -> GramComponents:
    """Integrate the Gram components of ``basis`` for ``family``.

    Integrals run over ``[a, b]`` only, interval by interval, with ``k + 2`` Gauss-Legendre nodes
    (exact for the piecewise polynomial integrands). Boundary terms are evaluated at ``a`` and
    ``b`` directly.

    Raises:
        InvalidConfigurationError: If the spline order does not match the family.
    """
    family = Family(family)
    k = basis.order
    if k != family.order:
        raise InvalidConfigurationError(f"{family.value} needs splines of order {family.order}, basis has order {k}")
    max_r = 1 if family is Family.MATERN12 else 2
    dim, n = basis.num_basis, basis.n_intervals
    h = basis.spacing

    nodes, weights = leggauss(k + 2)
    left = basis.knots[k : k + n]
    xs = left[:, None] + (nodes[None, :] + 1.0) * (h / 2.0)
    weights = weights * (h / 2.0)

    integrals = []
    for r in range(max_r + 1):
        _, values, _ = basis.active_window(xs.ravel(), r)
        values = values.reshape(n, k + 2, k + 1)
        per_interval = np.einsum("q,jqp,jqs->jps", weights, values, values)
        data = np.zeros((k + 1, dim))
        # interval j touches functions j..j+k
        for p in range(k + 1):
            for s in range(p + 1):
                data[p - s, s : s + n] += per_interval[:, p, s]
        integrals.append(SymBand(data))

    a, b = basis.domain
    first, values, _ = basis.active_window(np.array([a, b]), 0)
    pb0 = _point_products(dim, k, first, values, values, signs=(1.0, 1.0))
    extra = {}
    if family is Family.MATERN32:
        _, slopes, _ = basis.active_window(np.array([a, b]), 1)
        extra["p2"] = integrals[2]
        extra["pb1"] = _point_products(dim, k, first, slopes, slopes, signs=(1.0, 1.0))
        extra["pbx"] = _point_products(dim, k, first, values, slopes, signs=(-1.0, 1.0))
    logger.debug(f"gram components for {family.value}: dim={dim} width={k + 1} intervals={n}")
    return GramComponents(
        family=family,
        p0=integrals[0],
        p1=integrals[1],
        pb0=pb0,
        fingerprint=basis.fingerprint(),
        **extra,
    )


def _point_products(dim, k, first, u, v, signs) -> SymBand:
    """Band of ``Σ_x sign_x · ½ (u_x v_xᵀ + v_x u_xᵀ)`` over the two boundary points."""
    data = np.zeros((k + 1, dim))
    for point, sign in enumerate(signs):
        block = 0.5 * (np.outer(u[point], v[point]) + np.outer(v[point], u[point]))
        f = int(first[point])
        for p in range(k + 1):
            for s in range(p + 1):
                if f + p < dim:
                    data[p - s, f + s] += sign * block[p, s]
    return SymBand(data)


def _kuu_terms(comp: GramComponents, lengthscale: float) -> list[tuple[float, SymBand]]:
    ell = lengthscale
    if comp.family is Family.MATERN12:
        return [(ell / 2.0, comp.p1), (1.0 / (2.0 * ell), comp.p0), (0.5, comp.pb0)]
    return [
        (ell**3 / (12.0 * SQRT3), comp.p2),
        (ell / (2.0 * SQRT3), comp.p1),
        (SQRT3 / (4.0 * ell), comp.p0),
        (0.5, comp.pb0),
        (ell**2 / 6.0, comp.pb1),
        (ell / (2.0 * SQRT3), comp.pbx),
    ]


def _kuu_log_lengthscale_terms(comp: GramComponents, lengthscale: float) -> list[tuple[float, SymBand]]:
    ell = lengthscale
    if comp.family is Family.MATERN12:
        return [(ell / 2.0, comp.p1), (-1.0 / (2.0 * ell), comp.p0)]
    return [
        (ell**3 / (4.0 * SQRT3), comp.p2),
        (ell / (2.0 * SQRT3), comp.p1),
        (-SQRT3 / (4.0 * ell), comp.p0),
        (ell**2 / 3.0, comp.pb1),
        (ell / (2.0 * SQRT3), comp.pbx),
    ]


def _check_family(comp: GramComponents, hyper: MaternHyper):
    if comp.family is not hyper.family:
        raise InvalidConfigurationError(f"components built for {comp.family.value}, hyper is {hyper.family.value}")


def assemble_kuu(comp: GramComponents, hyper: MaternHyper, dim: int = 0) -> SymBand:
    """``K_uu`` for input dimension ``dim`` from precomputed components."""
    _check_family(comp, hyper)
    scale = 1.0 / hyper.amplitudes[dim]
    terms = [(scale * c, band) for c, band in _kuu_terms(comp, hyper.lengthscales[dim])]
    return band_combination(terms)


def assemble_kuu_grad(comp: GramComponents, hyper: MaternHyper, dim: int = 0) -> tuple[SymBand, SymBand]:
    """Derivatives of ``K_uu`` with respect to ``log ℓ`` and ``log σ_f²`` of dimension ``dim``."""
    _check_family(comp, hyper)
    scale = 1.0 / hyper.amplitudes[dim]
    d_lengthscale = band_combination(
        [(scale * c, band) for c, band in _kuu_log_lengthscale_terms(comp, hyper.lengthscales[dim])]
    )
    kuu = assemble_kuu(comp, hyper, dim)
    d_amplitude = SymBand(-kuu.data)
    return d_lengthscale, d_amplitude


def as_components(comp) -> tuple[GramComponents, ...]:
    """Normalize one component set or a sequence of them to a tuple."""
    if isinstance(comp, GramComponents):
        return (comp,)
    if isinstance(comp, Sequence):
        return tuple(comp)
    raise InvalidConfigurationError(f"expected GramComponents, got {type(comp).__name__}")


def matern_kernel(x1, x2, family: Family, lengthscale: float, amplitude: float) -> np.ndarray:
    """Stationary Matérn covariance between two 1D point sets."""
    r = np.abs(np.asarray(x1, dtype=np.float64)[:, None] - np.asarray(x2, dtype=np.float64)[None, :])
    if Family(family) is Family.MATERN12:
        return amplitude * np.exp(-r / lengthscale)
    scaled = SQRT3 * r / lengthscale
    return amplitude * (1.0 + scaled) * np.exp(-scaled)
