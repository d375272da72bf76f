"""Exception hierarchy for bandgp.

Every error raised on purpose by the package derives from :class:`BandGPError`, so callers
(and the command line) can catch a single type.

Example:
    >>> from bandgp.exceptions import BandGPError
    >>> try:
    ...     make_uniform_basis((0.0, 1.0), num_basis=2, order=2)
    ... except BandGPError as e:
    ...     print(e)
"""

from typing import Optional


class BandGPError(Exception):
    """Base class for all bandgp errors."""


class InvalidConfigurationError(BandGPError, ValueError):
    """Inconsistent options, e.g. too few basis functions for the spline order."""


class InvalidDomainError(BandGPError, ValueError):
    """Degenerate or reversed input domain."""


class InvalidOrderError(BandGPError, ValueError):
    """Derivative order larger than the spline order."""


class DimensionMismatchError(BandGPError, ValueError):
    """Operand shapes do not agree."""


class InvalidDataError(BandGPError, ValueError):
    """Bad training or query data.

    Attributes:
        index: Position of the offending value in the input arrays, if known.
        line: Line number in the source file, if the data came from a file.
    """

    def __init__(self, message: str, index: Optional[int] = None, line: Optional[int] = None):
        """Store the message and the location of the bad value."""
        super().__init__(message)
        self.index = index
        self.line = line


class NotPositiveDefiniteError(BandGPError, ArithmeticError):
    """Cholesky factorization met a non-positive pivot.

    Attributes:
        pivot: Zero-based index of the failing pivot.
        jitter: Largest diagonal jitter tried before giving up.
    """

    def __init__(self, message: str, pivot: Optional[int] = None, jitter: float = 0.0):
        """Store the message, the failing pivot and the jitter reached."""
        super().__init__(message)
        self.pivot = pivot
        self.jitter = jitter


class OptimizationError(BandGPError, RuntimeError):
    """The optimizer produced a non-finite objective.

    Attributes:
        last_good: Last hyperparameters with a finite objective.
    """

    def __init__(self, message: str, last_good=None):
        """Store the message and the last good hyperparameters."""
        super().__init__(message)
        self.last_good = last_good


class ModelFileError(BandGPError, ValueError):
    """A model file is malformed or has an unsupported version."""
