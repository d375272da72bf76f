"""Hyperparameter training.

A fit normalizes the inputs onto ``[0, M]`` per dimension, builds the bases and Gram components,
computes the sufficient statistics in a single pass over the data and then maximizes the
collapsed ELBO over the log-hyperparameters with L-BFGS-B. The data is never touched again after
the statistics pass, so each optimizer iteration costs ``O(M w²)``.

Example:
    >>> config = FitConfig(num_basis=50, family="matern32")
    >>> trainer = Trainer(config)
    >>> fit = trainer.run(x, y)
    >>> trainer.report.final_elbo
    812.4
"""

import time
from dataclasses import dataclass
from typing import Optional
from typing import Union

import numpy as np
from loguru import logger
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator
from scipy.optimize import minimize

from bandgp.config import BandGPSettings
from bandgp.constants import FD_STEP
from bandgp.constants import NOISE_FLOOR
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.design import Stats
from bandgp.design import precompute
from bandgp.exceptions import DimensionMismatchError
from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import InvalidDataError
from bandgp.exceptions import NotPositiveDefiniteError
from bandgp.exceptions import OptimizationError
from bandgp.model import FitResult
from bandgp.model import collapsed_elbo
from bandgp.model import elbo_gradient
from bandgp.model import finalize
from bandgp.rkhs_gram import GramComponents
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import gram_components
from bandgp.splines import SplineBasis
from bandgp.splines import make_uniform_basis
from bandgp.utils import check_finite


class FitConfig(BaseModel):
    """Options of a single fit.

    Attributes:
        num_basis: Basis functions per dimension; an int applies to every dimension.
        family: Matérn family, which fixes the spline order.
        structure: How dimensions combine.
        max_iters: Optimizer iteration cap.
        grad_tol: Stop once the gradient infinity norm is below this.
        seed: Recorded with the model; fitting itself is deterministic.
        fd_step: Finite-difference step on log-hyperparameters.
        chunk_size: Points per streaming chunk in the statistics pass.
        num_shards: Parallel shards in the statistics pass.
        init_lengthscale: Initial lengthscale in normalized units; default 10% of the domain width.
        init_amplitude: Initial signal variance; default the variance of ``y``.
        init_noise: Initial noise variance; default 10% of the variance of ``y``.
        train: When False the starting hyperparameters are kept and only the posterior is computed.
    """

    model_config = ConfigDict(frozen=True)

    num_basis: Union[int, list[int]] = 100
    family: Family = Family.MATERN32
    structure: Structure = Structure.ONE_D
    max_iters: int = Field(default=1000, ge=1)
    grad_tol: float = Field(default=1e-6, gt=0)
    seed: int = 0
    fd_step: float = Field(default=FD_STEP, gt=0)
    chunk_size: int = Field(default=65536, ge=1)
    num_shards: int = Field(default=1, ge=1)
    init_lengthscale: Optional[float] = Field(default=None, gt=0)
    init_amplitude: Optional[float] = Field(default=None, gt=0)
    init_noise: Optional[float] = Field(default=None, ge=NOISE_FLOOR)
    train: bool = True

    @model_validator(mode="after")
    def _check_num_basis(self) -> "FitConfig":
        counts = [self.num_basis] if isinstance(self.num_basis, int) else self.num_basis
        if not counts or any(m <= self.family.order for m in counts):
            raise ValueError(f"num_basis must exceed the spline order {self.family.order}, got {self.num_basis}")
        return self

    @classmethod
    def from_settings(cls, settings: Optional[BandGPSettings] = None, **overrides) -> "FitConfig":
        """Config from environment settings; ``None`` overrides are ignored."""
        settings = settings or BandGPSettings()
        values = {
            "num_basis": settings.num_basis,
            "family": settings.kernel,
            "structure": settings.structure,
            "max_iters": settings.max_iters,
            "grad_tol": settings.grad_tol,
            "seed": settings.seed,
            "fd_step": settings.fd_step,
            "chunk_size": settings.chunk_size,
            "num_shards": settings.num_shards,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def basis_counts(self, num_dims: int) -> list[int]:
        """Basis size for each of ``num_dims`` dimensions."""
        if isinstance(self.num_basis, int):
            return [self.num_basis] * num_dims
        if len(self.num_basis) != num_dims:
            raise DimensionMismatchError(f"{len(self.num_basis)} basis sizes for {num_dims} input dimensions")
        return list(self.num_basis)


@dataclass(frozen=True)
class InputTransform:
    """Per-dimension affine map ``z = (x - low) · scale`` from raw inputs onto ``[0, M_d]``."""

    low: tuple[float, ...]
    scale: tuple[float, ...]

    @classmethod
    def fit_range(cls, X: np.ndarray, upper) -> "InputTransform":
        """Map the observed range of each column of ``X`` onto ``[0, upper_d]``.

        Raises:
            InvalidDataError: If a column is constant.
        """
        low, high = X.min(axis=0), X.max(axis=0)
        flat = np.flatnonzero(high <= low)
        if flat.size:
            raise InvalidDataError(f"input column {int(flat[0])} has a degenerate range (all values equal)")
        scale = np.asarray(upper, dtype=np.float64) / (high - low)
        return cls(low=tuple(float(v) for v in low), scale=tuple(float(v) for v in scale))

    @property
    def num_dims(self) -> int:
        """Number of input dimensions."""
        return len(self.low)

    def apply(self, X) -> np.ndarray:
        """Map raw inputs to normalized coordinates."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.num_dims:
            raise DimensionMismatchError(f"inputs have {X.shape[1]} columns, transform expects {self.num_dims}")
        return (X - np.asarray(self.low)) * np.asarray(self.scale)

    def normalize_hyper(self, hyper: MaternHyper) -> MaternHyper:
        """Express raw-coordinate hyperparameters in normalized units; only lengthscales change."""
        if hyper.num_dims != self.num_dims:
            raise DimensionMismatchError(
                f"hyperparameters for {hyper.num_dims} dimensions, transform has {self.num_dims}"
            )
        return MaternHyper(
            family=hyper.family,
            log_lengthscales=tuple(float(v) for v in np.asarray(hyper.log_lengthscales) + np.log(self.scale)),
            log_amplitudes=hyper.log_amplitudes,
            log_noise=hyper.log_noise,
        )

    def to_dict(self) -> dict:
        """Plain-dict form stored in model files."""
        return {"low": list(self.low), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, data: dict) -> "InputTransform":
        """Inverse of :meth:`to_dict`."""
        return cls(low=tuple(data["low"]), scale=tuple(data["scale"]))


class FitReport(BaseModel):
    """Summary of a training run, printed as JSON by the command line."""

    elbo_trace: list[float] = Field(default_factory=list)
    iterations: int = 0
    precompute_seconds: float = 0.0
    optimize_seconds: float = 0.0
    converged: bool = False
    grad_norm: float = 0.0
    message: str = ""
    jitter: float = 0.0
    final_elbo: float = 0.0
    hyperparameters: dict[str, float] = Field(default_factory=dict)


class GradientReport(BaseModel):
    """Agreement between finite-difference gradients at two step sizes."""

    names: list[str]
    gradient: list[float]
    reference: list[float]
    relative_errors: list[float]
    worst_relative_error: float
    finite: bool


class Trainer:
    """Owns one fit: ``prepare`` (statistics pass), ``optimize`` and ``finalize``.

    Args:
        config: Fit options.

    Example:
        >>> trainer = Trainer(FitConfig(num_basis=64))
        >>> trainer.prepare(x, y)
        >>> hyper = trainer.optimize()
        >>> fit = trainer.finalize()
    """

    def __init__(self, config: Optional[FitConfig] = None):
        """Start an empty fit with ``config`` (defaults when omitted)."""
        self.config = config or FitConfig()
        self.report = FitReport()
        self.transform: Optional[InputTransform] = None
        self.bases: tuple[SplineBasis, ...] = ()
        self.comps: tuple[GramComponents, ...] = ()
        self.stats: Optional[Stats] = None
        self.hyper: Optional[MaternHyper] = None
        self._target_variance = 1.0

    def prepare(self, X, y, hyper: Optional[MaternHyper] = None) -> Stats:
        """Normalize inputs, build bases and components, and run the single statistics pass.

        Args:
            X: Inputs, shape ``(n,)`` or ``(n, D)``.
            y: Targets.
            hyper: Starting hyperparameters in raw input units; the data-driven defaults otherwise.
        """
        X = check_finite(X, "inputs")
        y = check_finite(y, "targets").ravel()
        if X.ndim == 1:
            X = X[:, None]
        if len(y) == 0:
            raise InvalidDataError("at least one data point is required")
        if X.shape[0] != len(y):
            raise DimensionMismatchError(f"{X.shape[0]} inputs but {len(y)} targets")
        num_dims = X.shape[1]
        structure = self.config.structure
        if structure is Structure.ONE_D and num_dims != 1:
            raise DimensionMismatchError(f"1d structure needs one input column, got {num_dims}")
        if structure is Structure.SEPARABLE_2D and num_dims != 2:
            raise DimensionMismatchError(f"separable structure needs two input columns, got {num_dims}")

        counts = self.config.basis_counts(num_dims)
        start = time.perf_counter()
        self.transform = InputTransform.fit_range(X, counts)
        self.bases = tuple(make_uniform_basis((0.0, float(m)), m, self.config.family.order) for m in counts)
        self.comps = tuple(gram_components(basis, self.config.family) for basis in self.bases)
        self.stats = precompute(
            structure,
            self.bases,
            self.transform.apply(X),
            y,
            chunk_size=self.config.chunk_size,
            num_shards=self.config.num_shards,
        )
        self.report.precompute_seconds = time.perf_counter() - start
        variance = float(np.var(y))
        self._target_variance = variance if variance > 0 else 1.0
        self.hyper = self.transform.normalize_hyper(hyper) if hyper is not None else self.initial_hyper()
        if self.hyper.family is not self.config.family:
            raise InvalidConfigurationError(
                f"hyperparameters are {self.hyper.family.value}, config is {self.config.family.value}"
            )
        logger.info(
            f"prepared {structure.value} model: n={self.stats.n} dim={self.stats.dim} "
            f"in {self.report.precompute_seconds:.3f}s"
        )
        return self.stats

    def initial_hyper(self) -> MaternHyper:
        """Starting point: user values where given, otherwise the data-driven defaults."""
        counts = np.array([b.num_basis for b in self.bases], dtype=np.float64)
        num_dims = len(counts)
        lengthscales = np.full(num_dims, self.config.init_lengthscale) if self.config.init_lengthscale else 0.1 * counts
        amplitude = self.config.init_amplitude or self._target_variance
        if self.config.structure is Structure.SEPARABLE_2D:
            amplitudes = np.array([amplitude] + [1.0] * (num_dims - 1))
        else:
            # κ is the sum of amplitudes for additive features
            amplitudes = np.full(num_dims, amplitude / num_dims)
        noise = max(self.config.init_noise or 0.1 * self._target_variance, NOISE_FLOOR)
        return MaternHyper.create(self.config.family, lengthscales, amplitudes, noise)

    def _bounds(self) -> list[tuple[float, float]]:
        """Box on the log-parameters: lengthscales within ``[1e-3, 1e3 M_d]``, variances within a
        factor ``1e6`` of the target variance, noise never below ``NOISE_FLOOR``."""
        variance = np.log(self._target_variance)
        lengthscales = [(np.log(1e-3), np.log(1e3 * b.num_basis)) for b in self.bases]
        free = 1 if self.config.structure is Structure.SEPARABLE_2D else len(self.bases)
        amplitudes = [(variance - np.log(1e6), variance + np.log(1e6))] * free
        noise = (np.log(NOISE_FLOOR), max(variance + np.log(1e6), np.log(NOISE_FLOOR) + 1.0))
        return [(float(lo), float(hi)) for lo, hi in [*lengthscales, *amplitudes, noise]]

    def optimize(self) -> MaternHyper:
        """Maximize the collapsed ELBO from the current hyperparameters.

        Raises:
            InvalidConfigurationError: If called before :meth:`prepare`.
            OptimizationError: If the objective becomes non-finite or unfactorizable.
        """
        if self.stats is None or self.hyper is None:
            raise InvalidConfigurationError("prepare must run before optimize")
        stats, comps, structure = self.stats, self.comps, self.config.structure
        family, num_dims = self.config.family, self.hyper.num_dims
        start_hyper = self.hyper
        last_good = {"hyper": start_hyper}
        values: dict[bytes, float] = {}

        def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
            try:
                hyper = MaternHyper.from_vector(theta, family, structure, num_dims)
                value = collapsed_elbo(stats, comps, hyper)
                grad = elbo_gradient(stats, comps, hyper, step=self.config.fd_step)
            except NotPositiveDefiniteError as e:
                message = f"objective failed at {theta.tolist()}: {e}"
                raise OptimizationError(message, last_good=last_good["hyper"]) from e
            if not (np.isfinite(value) and np.all(np.isfinite(grad))):
                raise OptimizationError(f"non-finite objective at {theta.tolist()}", last_good=last_good["hyper"])
            values[theta.tobytes()] = value
            return -value, -grad

        trace: list[float] = []

        def record(theta: np.ndarray):
            last_good["hyper"] = MaternHyper.from_vector(theta, family, structure, num_dims)
            value = values.get(theta.tobytes())
            if value is None:
                value = collapsed_elbo(stats, comps, last_good["hyper"])
            trace.append(value)
            logger.debug(f"iteration {len(trace) - 1}: elbo={value:.6f}")

        theta0 = start_hyper.to_vector(structure)
        bounds = self._bounds()
        trace.append(collapsed_elbo(stats, comps, start_hyper))
        start = time.perf_counter()
        result = minimize(
            objective,
            theta0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            callback=record,
            options={"maxiter": self.config.max_iters, "gtol": self.config.grad_tol, "ftol": 0.0},
        )
        self.report.optimize_seconds = time.perf_counter() - start
        self.hyper = MaternHyper.from_vector(result.x, family, structure, num_dims)
        grad_norm = projected_grad_norm(result.x, result.jac, bounds)
        converged = grad_norm <= self.config.grad_tol
        self.report.elbo_trace = trace
        self.report.iterations = int(result.nit)
        self.report.converged = converged
        self.report.grad_norm = grad_norm
        self.report.message = str(result.message)
        self.report.final_elbo = float(-result.fun)
        self.report.hyperparameters = dict(zip(self.hyper.parameter_names(structure), map(float, result.x)))
        log = logger.info if converged else logger.warning
        log(
            f"optimizer stopped after {result.nit} iterations: elbo={-result.fun:.6f} "
            f"|grad|={grad_norm:.3g} converged={converged} ({result.message})"
        )
        return self.hyper

    def hold(self) -> MaternHyper:
        """Record the starting hyperparameters as the result without optimizing."""
        if self.stats is None or self.hyper is None:
            raise InvalidConfigurationError("prepare must run before hold")
        structure = self.config.structure
        value = collapsed_elbo(self.stats, self.comps, self.hyper)
        gradient = elbo_gradient(self.stats, self.comps, self.hyper, step=self.config.fd_step)
        self.report.elbo_trace = [value]
        self.report.iterations = 0
        self.report.converged = False
        self.report.grad_norm = float(np.max(np.abs(gradient)))
        self.report.message = "hyperparameters held fixed"
        self.report.final_elbo = value
        self.report.hyperparameters = dict(
            zip(self.hyper.parameter_names(structure), map(float, self.hyper.to_vector(structure)))
        )
        logger.info(f"hyperparameters held fixed: elbo={value:.6f}")
        return self.hyper

    def finalize(self) -> FitResult:
        """Factorize at the current hyperparameters and return the fitted model."""
        if self.stats is None or self.hyper is None:
            raise InvalidConfigurationError("prepare must run before finalize")
        fit = finalize(self.stats, self.comps, self.hyper, bases=self.bases, transform=self.transform)
        self.report.jitter = fit.jitter
        return fit

    def run(self, X, y, hyper: Optional[MaternHyper] = None) -> FitResult:
        """Prepare, optimize (or hold when ``config.train`` is False) and finalize."""
        self.prepare(X, y, hyper=hyper)
        if self.config.train:
            self.optimize()
        else:
            self.hold()
        return self.finalize()


def fit(X, y, config: Optional[FitConfig] = None, hyper: Optional[MaternHyper] = None) -> FitResult:
    """Fit a model to ``(X, y)``; see :class:`Trainer` for the steps."""
    return Trainer(config).run(X, y, hyper=hyper)


def projected_grad_norm(theta: np.ndarray, grad: np.ndarray, bounds: list[tuple[float, float]]) -> float:
    """Infinity norm of a minimization gradient with components blocked by active bounds removed."""
    theta, grad = np.asarray(theta, dtype=np.float64), np.asarray(grad, dtype=np.float64).copy()
    low, high = np.asarray(bounds, dtype=np.float64).T
    grad[(theta <= low) & (grad > 0)] = 0.0
    grad[(theta >= high) & (grad < 0)] = 0.0
    return float(np.max(np.abs(grad))) if grad.size else 0.0


def gradient_check(
    stats: Stats, comp, hyper: MaternHyper, steps: tuple[float, float] = (FD_STEP, 1e-5)
) -> GradientReport:
    """Compare gradients at two finite-difference step sizes.

    The relative error of each component is ``|g1 - g2| / max(|g1|, |g2|, 1)``, so components
    that vanish at an optimum are compared absolutely.
    """
    gradient = elbo_gradient(stats, comp, hyper, step=steps[0])
    reference = elbo_gradient(stats, comp, hyper, step=steps[1])
    finite = bool(np.all(np.isfinite(gradient)) and np.all(np.isfinite(reference)))
    denom = np.maximum(np.maximum(np.abs(gradient), np.abs(reference)), 1.0)
    errors = np.abs(gradient - reference) / denom
    if not finite:
        errors = np.where(np.isfinite(errors), errors, np.inf)
        logger.warning("gradient check found non-finite entries")
    return GradientReport(
        names=hyper.parameter_names(stats.structure),
        gradient=gradient.tolist(),
        reference=reference.tolist(),
        relative_errors=errors.tolist(),
        worst_relative_error=float(np.max(errors)) if errors.size else 0.0,
        finite=finite,
    )
