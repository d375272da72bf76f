"""Configuration module for bandgp.

This module provides default settings for fitting and the command line, using pydantic for
validation and environment variable support.

Example:
    >>> # Create settings from environment variables
    >>> settings = BandGPSettings()
    >>> # Create settings with custom values
    >>> settings = BandGPSettings(
    ...     num_basis=200,
    ...     kernel="matern12",
    ...     max_iters=500
    ... )
"""

from pydantic import Field
from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict

from bandgp.constants import ENV_PREFIX
from bandgp.constants import FD_STEP
from bandgp.constants import Family
from bandgp.constants import Structure


class BandGPSettings(BaseSettings):
    """Default settings for model fitting and data handling.

    Values are read from environment variables with the prefix defined in
    constants.ENV_PREFIX, and from a .env file in the working directory.

    Attributes:
        num_basis: Number of B-spline basis functions per input dimension. Defaults to 100.
        kernel: Matérn family. Defaults to 'matern32'.
        structure: Multi-dimensional structure. Defaults to '1d'.
        max_iters: Maximum optimizer iterations. Defaults to 1000.
        grad_tol: Gradient infinity-norm stopping tolerance. Defaults to 1e-6.
        seed: Seed for data splits and synthetic data. Defaults to 0.
        fd_step: Central finite-difference step on log-hyperparameters. Defaults to 1e-4.
        num_shards: Number of data shards for the statistics pass. Defaults to 1.
        chunk_size: Points processed per streaming chunk. Defaults to 65536.
        delimiter: CSV delimiter. Defaults to ','.
        log_level: Logging level for the command line. Defaults to 'INFO'.

    Example:
        >>> settings = BandGPSettings()
        >>> print(f"Fitting {settings.num_basis} splines with {settings.kernel.value}")
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix=ENV_PREFIX,
        extra="ignore",
        populate_by_name=True,
    )

    num_basis: int = Field(default=100, gt=0, validation_alias=f"{ENV_PREFIX}num_basis", alias="num_basis")
    kernel: Family = Field(default=Family.MATERN32, validation_alias=f"{ENV_PREFIX}kernel", alias="kernel")
    structure: Structure = Field(
        default=Structure.ONE_D, validation_alias=f"{ENV_PREFIX}structure", alias="structure"
    )
    max_iters: int = Field(default=1000, ge=1, validation_alias=f"{ENV_PREFIX}max_iters", alias="max_iters")
    grad_tol: float = Field(default=1e-6, gt=0, validation_alias=f"{ENV_PREFIX}grad_tol", alias="grad_tol")
    seed: int = Field(default=0, validation_alias=f"{ENV_PREFIX}seed", alias="seed")
    fd_step: float = Field(default=FD_STEP, gt=0, validation_alias=f"{ENV_PREFIX}fd_step", alias="fd_step")
    num_shards: int = Field(default=1, ge=1, validation_alias=f"{ENV_PREFIX}num_shards", alias="num_shards")
    chunk_size: int = Field(default=65536, ge=1, validation_alias=f"{ENV_PREFIX}chunk_size", alias="chunk_size")
    delimiter: str = Field(default=",", validation_alias=f"{ENV_PREFIX}delimiter", alias="delimiter")
    log_level: str = Field(default="INFO", validation_alias=f"{ENV_PREFIX}log_level", alias="log_level")
