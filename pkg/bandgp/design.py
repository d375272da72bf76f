"""Sparse cross-covariances and streamed sufficient statistics.

By the reproducing property ``Cov[u_m, f(x)] = B_m(x)``, so a column of ``K_uf`` is just the
spline basis evaluated at one input: at most ``k + 1`` contiguous nonzeros in 1D. Training with a
Gaussian likelihood only ever needs

    A = K_uf K_fu,   b = K_uf y,   c = yᵀy,   N

which one streaming pass accumulates without materializing ``K_uf``. None of them depends on
kernel hyperparameters, and they add up across data shards.

Example:
    >>> basis = make_uniform_basis((0.0, 100.0), num_basis=100, order=2)
    >>> stats = precompute_stats(basis, x, y)
    >>> stats.A.width
    3
"""

import functools
import hashlib
import operator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence
from typing import Union

import numpy as np
from loguru import logger

from bandgp.banded import SymBand
from bandgp.constants import Structure
from bandgp.exceptions import DimensionMismatchError
from bandgp.exceptions import InvalidConfigurationError
from bandgp.splines import SplineBasis
from bandgp.utils import check_finite


PAIR_BUDGET = 1 << 21


@dataclass(frozen=True)
class SparseRow:
    """One column of ``K_uf``: ``values`` sit at indices ``first_index, first_index + 1, ...``.

    An empty row (point outside the domain) has ``first_index == -1``.
    """

    first_index: int
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class Stats:
    """Sufficient statistics of a dataset for a fixed feature set.

    Attributes:
        A: ``K_uf K_fu``; a :class:`SymBand` for 1D and separable features, a dense array for additive ones.
        b: ``K_uf y``.
        c: ``yᵀy``.
        n: Number of data points.
        structure: Feature structure the statistics were built for.
        fingerprint: Hash of the bases, used to refuse mixing incompatible statistics.
    """

    A: Union[SymBand, np.ndarray]
    b: np.ndarray
    c: float
    n: int
    structure: Structure
    fingerprint: str

    @property
    def dim(self) -> int:
        """Number of features."""
        return self.b.shape[0]

    @property
    def is_banded(self) -> bool:
        """True when ``A`` is stored as a band."""
        return isinstance(self.A, SymBand)

    def dense_a(self) -> np.ndarray:
        """``A`` as a dense matrix."""
        return self.A.to_dense() if self.is_banded else np.array(self.A)

    def merge(self, other: "Stats") -> "Stats":
        """Statistics of the union of the two underlying datasets."""
        if self.fingerprint != other.fingerprint or self.structure is not other.structure:
            raise InvalidConfigurationError("cannot merge statistics built from different bases")
        if self.is_banded:
            width = max(self.A.width, other.A.width)
            A = SymBand(self.A.widened(width).data + other.A.widened(width).data)
        else:
            A = self.A + other.A
        return Stats(
            A=A,
            b=self.b + other.b,
            c=self.c + other.c,
            n=self.n + other.n,
            structure=self.structure,
            fingerprint=self.fingerprint,
        )

    __add__ = merge


def design_row(basis: SplineBasis, x: float) -> SparseRow:
    """Column of ``K_uf`` for a single input."""
    first, values, inside = basis.active_window(x)
    if not inside[0]:
        return SparseRow(first_index=-1, values=np.empty(0))
    return SparseRow(first_index=int(first[0]), values=values[0])


def design_rows(basis: SplineBasis, x) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of :func:`design_row` as ``(indices, values)`` arrays of shape ``(n, k + 1)``.

    Rows of points outside the domain are all-zero with valid (clipped) indices.
    """
    first, values, _ = basis.active_window(x)
    return first[:, None] + np.arange(basis.order + 1)[None, :], values


def feature_rows(structure: Structure, bases: Sequence[SplineBasis], X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero indices and values of ``K_uf`` columns for any structure.

    Args:
        structure: Feature structure.
        bases: One basis per input dimension.
        X: Inputs of shape ``(n, D)`` (or ``(n,)`` in 1D), in normalized coordinates.

    Returns:
        tuple: ``(indices, values)`` each of shape ``(n, r)``; ``r`` is ``k + 1``,
        ``(k + 1)²`` or ``D (k + 1)`` for 1D, separable and additive features.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != len(bases):
        raise DimensionMismatchError(f"inputs have {X.shape[1]} columns, expected {len(bases)}")
    if structure is Structure.ONE_D:
        return design_rows(bases[0], X[:, 0])
    if structure is Structure.SEPARABLE_2D:
        idx1, val1 = design_rows(bases[0], X[:, 0])
        idx2, val2 = design_rows(bases[1], X[:, 1])
        m2 = bases[1].num_basis
        indices = (idx1[:, :, None] * m2 + idx2[:, None, :]).reshape(len(X), -1)
        values = (val1[:, :, None] * val2[:, None, :]).reshape(len(X), -1)
        return indices, values
    offsets = np.cumsum([0] + [b.num_basis for b in bases[:-1]])
    parts = [design_rows(basis, X[:, d]) for d, basis in enumerate(bases)]
    indices = np.concatenate([idx + off for (idx, _), off in zip(parts, offsets)], axis=1)
    values = np.concatenate([val for _, val in parts], axis=1)
    return indices, values


def features_per_point(structure: Structure, bases: Sequence[SplineBasis]) -> int:
    """Nonzero entries in one column of ``K_uf``."""
    r = bases[0].order + 1
    if structure is Structure.SEPARABLE_2D:
        return r * r
    return r * len(bases)


def num_features(structure: Structure, bases: Sequence[SplineBasis]) -> int:
    """Length of the feature vector."""
    if structure is Structure.SEPARABLE_2D:
        return bases[0].num_basis * bases[1].num_basis
    return sum(b.num_basis for b in bases)


def stats_width(structure: Structure, bases: Sequence[SplineBasis]) -> int:
    """Band width of ``A``; zero means dense."""
    k = bases[0].order
    if structure is Structure.ONE_D:
        return k + 1
    if structure is Structure.SEPARABLE_2D:
        return min(k * bases[1].num_basis + k + 1, num_features(structure, bases))
    return 0


def combine_fingerprints(structure: Structure, fingerprints: Sequence[str]) -> str:
    """Fingerprint of a feature set from the fingerprints of its bases."""
    digest = hashlib.sha256(Structure(structure).value.encode())
    for fingerprint in fingerprints:
        digest.update(fingerprint.encode())
    return digest.hexdigest()[:16]


def bases_fingerprint(structure: Structure, bases: Sequence[SplineBasis]) -> str:
    """Fingerprint of the feature set built from ``bases``."""
    return combine_fingerprints(structure, [basis.fingerprint() for basis in bases])


def _check_bases(structure: Structure, bases: Sequence[SplineBasis]):
    if not bases:
        raise InvalidConfigurationError("at least one basis is required")
    if structure is Structure.ONE_D and len(bases) != 1:
        raise InvalidConfigurationError("1d features take exactly one basis")
    if structure is Structure.SEPARABLE_2D and len(bases) != 2:
        raise InvalidConfigurationError(
            f"separable features are limited to two dimensions, got {len(bases)} (basis size grows exponentially)"
        )
    if len({b.order for b in bases}) != 1:
        raise InvalidConfigurationError("all bases must share the same spline order")


def empty_stats(structure: Structure, bases: Sequence[SplineBasis]) -> Stats:
    """Statistics of an empty dataset."""
    dim = num_features(structure, bases)
    width = stats_width(structure, bases)
    A = SymBand.zeros(dim, width) if width else np.zeros((dim, dim))
    return Stats(A=A, b=np.zeros(dim), c=0.0, n=0, structure=structure, fingerprint=bases_fingerprint(structure, bases))


def _pair_cells(indices: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row index, column index and weight of every product ``values[:, p] · values[:, s]``."""
    n, r = indices.shape
    rows = np.repeat(indices, r, axis=1).ravel()
    cols = np.tile(indices, (1, r)).ravel()
    weights = (values[:, :, None] * values[:, None, :]).reshape(n * r * r)
    return rows, cols, weights


def _accumulate(stats: Stats, bases: Sequence[SplineBasis], X: np.ndarray, y: np.ndarray) -> Stats:
    """Statistics of one chunk added onto ``stats``; ``A`` takes a single scatter-add."""
    indices, values = feature_rows(stats.structure, bases, X)
    dim = stats.dim
    b = stats.b + np.bincount(indices.ravel(), weights=(values * y[:, None]).ravel(), minlength=dim)
    rows, cols, weights = _pair_cells(indices, values)
    if stats.is_banded:
        width = stats.A.width
        keep = rows >= cols
        cell = (rows[keep] - cols[keep]) * dim + cols[keep]
        flat = np.bincount(cell, weights=weights[keep], minlength=width * dim)
        A = SymBand(stats.A.data + flat.reshape(width, dim))
    else:
        flat = np.bincount(rows * dim + cols, weights=weights, minlength=dim * dim)
        A = stats.A + flat.reshape(dim, dim)
    return Stats(
        A=A,
        b=b,
        c=stats.c + float(y @ y),
        n=stats.n + len(y),
        structure=stats.structure,
        fingerprint=stats.fingerprint,
    )


def _stream(structure, bases, X, y, chunk_size) -> Stats:
    stats = empty_stats(structure, bases)
    # cap the per-chunk pair buffers at PAIR_BUDGET products
    pairs = features_per_point(structure, bases) ** 2
    step = max(1, min(chunk_size, PAIR_BUDGET // pairs))
    for start in range(0, len(y), step):
        stats = _accumulate(stats, bases, X[start : start + step], y[start : start + step])
    return stats


def precompute(
    structure: Structure,
    bases: Sequence[SplineBasis],
    X,
    y,
    chunk_size: int = 65536,
    num_shards: int = 1,
) -> Stats:
    """Single streaming pass over ``(X, y)`` for any structure.

    Args:
        structure: Feature structure.
        bases: One basis per input dimension (normalized coordinates).
        X: Inputs, shape ``(n,)`` or ``(n, D)``.
        y: Targets, shape ``(n,)``.
        chunk_size: Points per chunk, lowered so a chunk holds at most ``PAIR_BUDGET`` feature products;
            peak extra memory is ``O(chunk_size · r² + M · width)``.
        num_shards: Contiguous shards processed in a thread pool and merged in order.

    Raises:
        DimensionMismatchError: If ``X`` and ``y`` lengths differ.
        InvalidDataError: On a non-finite input, with its index.
        InvalidConfigurationError: For unsupported basis combinations.
    """
    structure = Structure(structure)
    _check_bases(structure, bases)
    X = check_finite(X, "inputs")
    y = check_finite(y, "targets").ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    num_shards = max(1, min(num_shards, max(len(y), 1)))
    bounds = np.linspace(0, len(y), num_shards + 1).astype(int)
    shards = [(X[lo:hi], y[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]
    if num_shards == 1:
        stats = _stream(structure, bases, X, y, chunk_size)
    else:
        with ThreadPoolExecutor(max_workers=num_shards) as pool:
            parts = list(pool.map(lambda shard: _stream(structure, bases, *shard, chunk_size), shards))
        stats = functools.reduce(operator.add, parts)
    logger.debug(f"precomputed {structure.value} statistics: n={stats.n} dim={stats.dim} shards={num_shards}")
    return stats


def precompute_stats(basis: SplineBasis, X, y, **kwargs) -> Stats:
    """One-dimensional statistics; ``A`` is banded with width ``k + 1``."""
    return precompute(Structure.ONE_D, [basis], X, y, **kwargs)


def precompute_stats_separable_2d(basis_x: SplineBasis, basis_y: SplineBasis, X, y, **kwargs) -> Stats:
    """Tensor-product statistics over the flattened index ``i1 · M2 + i2``.

    ``A`` is banded with width ``k M2 + k + 1``.
    """
    return precompute(Structure.SEPARABLE_2D, [basis_x, basis_y], X, y, **kwargs)


def precompute_stats_additive(bases: Sequence[SplineBasis], X, y, **kwargs) -> Stats:
    """Concatenated per-dimension statistics; ``A`` couples dimensions and is stored dense."""
    return precompute(Structure.ADDITIVE, list(bases), X, y, **kwargs)
