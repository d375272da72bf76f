"""Versioned JSON model documents.

A model file stores everything needed to rebuild a :class:`~bandgp.model.FitResult` without the
training data: basis specs, the input transform, log-hyperparameters and the sufficient
statistics. Loading re-runs ``finalize`` on the stored statistics and checks the factors.

Example:
    >>> save_model(fit, "model.json", seed=0)
    >>> fit, document = load_model("model.json")
"""

from pathlib import Path
from typing import Optional
from typing import Union

import numpy as np
from loguru import logger
from pydantic import BaseModel
from pydantic import Field
from pydantic import ValidationError
from pydantic import field_validator

from bandgp.banded import SymBand
from bandgp.constants import MODEL_FILE_VERSION
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.design import Stats
from bandgp.exceptions import BandGPError
from bandgp.exceptions import ModelFileError
from bandgp.model import FitResult
from bandgp.model import finalize
from bandgp.optimize import InputTransform
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import gram_components
from bandgp.splines import SplineBasis


class BasisSpec(BaseModel):
    """Serialized :class:`SplineBasis`."""

    domain: tuple[float, float]
    num_basis: int = Field(gt=0)
    order: int = Field(ge=0)


class TransformSpec(BaseModel):
    """Serialized input transform."""

    low: list[float]
    scale: list[float]


class StatsSpec(BaseModel):
    """``A`` is stored in band layout (``width × dim``) when ``banded``, else as a dense matrix."""

    banded: bool
    a: list[list[float]]
    b: list[float]
    c: float
    n: int = Field(ge=0)
    fingerprint: str


class ModelFile(BaseModel):
    """Version 1 JSON model document."""

    version: int = MODEL_FILE_VERSION
    structure: Structure
    family: Family
    bases: list[BasisSpec]
    transform: Optional[TransformSpec] = None
    log_lengthscales: list[float]
    log_amplitudes: list[float]
    log_noise: float
    jitter: float = 0.0
    seed: int = 0
    stats: StatsSpec

    @field_validator("version")
    @classmethod
    def _known_version(cls, value: int) -> int:
        if value != MODEL_FILE_VERSION:
            raise ValueError(f"unsupported model file version {value}, expected {MODEL_FILE_VERSION}")
        return value

    @classmethod
    def from_fit(cls, fit: FitResult, seed: int = 0) -> "ModelFile":
        """Document for a fitted model."""
        stats = fit.stats
        a = stats.A.data if stats.is_banded else np.asarray(stats.A)
        transform = None
        if fit.transform is not None:
            transform = TransformSpec(**fit.transform.to_dict())
        return cls(
            structure=fit.structure,
            family=fit.hyper.family,
            bases=[BasisSpec(**basis.spec()) for basis in fit.bases],
            transform=transform,
            log_lengthscales=list(fit.hyper.log_lengthscales),
            log_amplitudes=list(fit.hyper.log_amplitudes),
            log_noise=fit.hyper.log_noise,
            jitter=fit.jitter,
            seed=seed,
            stats=StatsSpec(
                banded=stats.is_banded,
                a=a.tolist(),
                b=stats.b.tolist(),
                c=stats.c,
                n=stats.n,
                fingerprint=stats.fingerprint,
            ),
        )

    def to_fit(self) -> FitResult:
        """Rebuild and verify the fit.

        Raises:
            ModelFileError: If the document is inconsistent or the factors fail verification.
        """
        try:
            bases = [SplineBasis.from_spec(spec.model_dump()) for spec in self.bases]
            comps = [gram_components(basis, self.family) for basis in bases]
            a = np.asarray(self.stats.a, dtype=np.float64)
            stats = Stats(
                A=SymBand(a) if self.stats.banded else a,
                b=np.asarray(self.stats.b, dtype=np.float64),
                c=self.stats.c,
                n=self.stats.n,
                structure=self.structure,
                fingerprint=self.stats.fingerprint,
            )
            hyper = MaternHyper(
                family=self.family,
                log_lengthscales=tuple(self.log_lengthscales),
                log_amplitudes=tuple(self.log_amplitudes),
                log_noise=self.log_noise,
            )
            transform = InputTransform.from_dict(self.transform.model_dump()) if self.transform else None
            fit = finalize(stats, comps, hyper, bases=bases, transform=transform)
            fit.check()
        except BandGPError as e:
            raise ModelFileError(f"model file does not describe a valid fit: {e}") from e
        if fit.jitter != self.jitter:
            logger.warning(f"re-finalized with jitter {fit.jitter:g}, file recorded {self.jitter:g}")
        return fit


def save_model(fit: FitResult, path: Union[str, Path], seed: int = 0) -> ModelFile:
    """Write ``fit`` as JSON to ``path`` and return the document."""
    document = ModelFile.from_fit(fit, seed=seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"model written to {path}")
    return document


def load_model(path: Union[str, Path]) -> tuple[FitResult, ModelFile]:
    """Read, validate and re-finalize a model file.

    Raises:
        ModelFileError: On unreadable JSON, an unknown version or an inconsistent fit.
    """
    try:
        document = ModelFile.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValidationError) as e:
        raise ModelFileError(f"cannot read model file {path}: {e}") from e
    return document.to_fit(), document
