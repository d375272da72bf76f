"""Constants module for bandgp.

This module contains constant values shared by the numerical core and the command line.

Example:
    >>> from bandgp.constants import ENV_PREFIX
    >>> env_var = f"{ENV_PREFIX}NUM_BASIS"  # Creates 'BANDGP_NUM_BASIS'
"""

from enum import Enum


ENV_PREFIX = "BANDGP_"

# Highest supported spline order.
MAX_ORDER = 3

KNOT_RTOL = 1e-12

NOISE_FLOOR = 1e-8

# Jitter ladder, relative to the mean diagonal of the matrix being factorized.
JITTER_START = 1e-10
JITTER_GROWTH = 10.0
JITTER_MAX = 1e-4

FD_STEP = 1e-4

VARIANCE_FLOOR = 1e-12

MODEL_FILE_VERSION = 1

# Published results on the synthetic benchmark (MSE in units of 1e-1, NLPD).
REFERENCE_SYNTHETIC_MSE_E1 = 0.39
REFERENCE_SYNTHETIC_NLPD = -0.15


class Family(str, Enum):
    """Matérn kernel families with a closed-form RKHS inner product."""

    MATERN12 = "matern12"
    MATERN32 = "matern32"

    @property
    def order(self) -> int:
        """Spline order matched to the family (k = ν + 1/2)."""
        return 1 if self is Family.MATERN12 else 2


class Structure(str, Enum):
    """How one-dimensional features are combined for multi-dimensional inputs."""

    ONE_D = "1d"
    SEPARABLE_2D = "separable2d"
    ADDITIVE = "additive"
