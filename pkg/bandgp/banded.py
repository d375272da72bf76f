"""Symmetric-banded and lower-banded matrices.

Both types use the LAPACK lower band layout: ``data`` has shape ``(width, dim)`` and
``data[d, j]`` holds entry ``(j + d, j)``. Cells with ``j + d >= dim`` are padding and stay zero.
This is the layout ``scipy.linalg.lapack`` expects, so factorization and triangular solves go
straight to ``pbtrf`` and ``tbtrs``.

Example:
    >>> S = SymBand.from_dense(np.array([[4.0, 2.0], [2.0, 3.0]]), width=2)
    >>> L = chol(S)
    >>> L.to_dense()
    array([[2.        , 0.        ],
           [1.        , 1.41421356]])
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from loguru import logger
from scipy.linalg import lapack

from bandgp.exceptions import DimensionMismatchError
from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import NotPositiveDefiniteError


@dataclass(frozen=True, eq=False)
class SymBand:
    """Symmetric matrix stored by its main diagonal and ``width - 1`` sub-diagonals.

    Attributes:
        data: Array of shape ``(width, dim)``.
    """

    data: np.ndarray

    def __post_init__(self):
        """Reject data that is not a ``(width, dim)`` array with ``1 <= width <= dim``."""
        if self.data.ndim != 2 or not 1 <= self.data.shape[0] <= max(self.data.shape[1], 1):
            raise InvalidConfigurationError(
                f"band data must have shape (width, dim) with 1 <= width <= dim, got {self.data.shape}"
            )

    @property
    def dim(self) -> int:
        """Matrix size."""
        return self.data.shape[1]

    @property
    def width(self) -> int:
        """Stored diagonals, the main one included."""
        return self.data.shape[0]

    @classmethod
    def zeros(cls, dim: int, width: int) -> "SymBand":
        """All-zero band."""
        return cls(np.zeros((min(width, dim), dim)))

    @classmethod
    def identity(cls, dim: int, width: int = 1) -> "SymBand":
        """Identity matrix stored with ``width`` diagonals."""
        data = np.zeros((min(width, dim), dim))
        data[0] = 1.0
        return cls(data)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, width: int) -> "SymBand":
        """Band of a dense symmetric matrix; the lower triangle is read."""
        matrix = np.asarray(matrix, dtype=np.float64)
        dim = matrix.shape[0]
        width = min(width, dim)
        data = np.zeros((width, dim))
        for d in range(width):
            data[d, : dim - d] = np.diagonal(matrix, -d)
        return cls(data)

    def to_dense(self) -> np.ndarray:
        """Full symmetric matrix."""
        dense = np.zeros((self.dim, self.dim))
        for d in range(self.width):
            idx = np.arange(self.dim - d)
            dense[idx + d, idx] = self.data[d, : self.dim - d]
            dense[idx, idx + d] = self.data[d, : self.dim - d]
        return dense

    def diagonal(self) -> np.ndarray:
        """Copy of the main diagonal."""
        return self.data[0].copy()

    def add_diagonal(self, value: float) -> "SymBand":
        """Copy with ``value`` added to the main diagonal."""
        data = self.data.copy()
        data[0] += value
        return SymBand(data)

    def widened(self, width: int) -> "SymBand":
        """Copy stored with at least ``width`` diagonals (zero padded)."""
        width = min(width, self.dim)
        if width <= self.width:
            return self
        data = np.zeros((width, self.dim))
        data[: self.width] = self.data
        return SymBand(data)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Product with a vector."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.dim:
            raise DimensionMismatchError(f"vector of length {v.shape[0]} for a {self.dim}-dim band")
        out = self.data[0] * v
        for d in range(1, self.width):
            n = self.dim - d
            out[d:] += self.data[d, :n] * v[:n]
            out[:n] += self.data[d, :n] * v[d:]
        return out


@dataclass(frozen=True, eq=False)
class LowerBand:
    """Lower-triangular banded matrix, typically a Cholesky factor.

    Attributes:
        data: Array of shape ``(width, dim)`` in the same layout as :class:`SymBand`.
    """

    data: np.ndarray

    @property
    def dim(self) -> int:
        """Matrix size."""
        return self.data.shape[1]

    @property
    def width(self) -> int:
        """Stored diagonals, the main one included."""
        return self.data.shape[0]

    def diagonal(self) -> np.ndarray:
        """Copy of the main diagonal."""
        return self.data[0].copy()

    def to_dense(self) -> np.ndarray:
        """Full lower-triangular matrix."""
        dense = np.zeros((self.dim, self.dim))
        for d in range(self.width):
            idx = np.arange(self.dim - d)
            dense[idx + d, idx] = self.data[d, : self.dim - d]
        return dense


def chol(S: SymBand) -> LowerBand:
    """Banded Cholesky factor ``L`` with ``L Lᵀ = S`` and the same width.

    Raises:
        NotPositiveDefiniteError: On a non-positive pivot; ``pivot`` is its zero-based index.
    """
    factor, info = lapack.dpbtrf(np.asfortranarray(S.data), lower=1)
    if info > 0:
        raise NotPositiveDefiniteError(f"leading minor {info} is not positive definite", pivot=info - 1)
    if info < 0:
        raise InvalidConfigurationError(f"illegal argument {-info} passed to dpbtrf")
    logger.trace(f"banded cholesky dim={S.dim} width={S.width}")
    return LowerBand(factor)


def chol_product(L: LowerBand) -> SymBand:
    """``L Lᵀ`` as a band of the same width."""
    ld = L.data
    out = np.zeros_like(ld)
    for d in range(L.width):
        for e in range(L.width - d):
            # (L Lᵀ)[j + d, j] picks up L[j + d, j - e] L[j, j - e]
            out[d, e:] += ld[d + e, : L.dim - e] * ld[e, : L.dim - e]
    for d in range(1, L.width):
        out[d, L.dim - d :] = 0.0
    return SymBand(out)


def _triangular_solve(L: LowerBand, v: np.ndarray, trans: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != L.dim:
        raise DimensionMismatchError(f"right-hand side has {v.shape[0]} rows, factor has dim {L.dim}")
    rhs = v.reshape(L.dim, -1)
    x, info = lapack.dtbtrs(L.data, np.asfortranarray(rhs), uplo="L", trans=trans)
    if info > 0:
        raise NotPositiveDefiniteError(f"factor is singular at diagonal {info - 1}", pivot=info - 1)
    return x.reshape(v.shape)


def solve_lower(L: LowerBand, v: np.ndarray) -> np.ndarray:
    """Forward substitution ``L x = v`` for a vector or a ``(dim, nrhs)`` matrix."""
    return _triangular_solve(L, v, "N")


def solve_upper(L: LowerBand, v: np.ndarray) -> np.ndarray:
    """Backward substitution ``Lᵀ x = v``."""
    return _triangular_solve(L, v, "T")


def cho_solve(L: LowerBand, v: np.ndarray) -> np.ndarray:
    """``S⁻¹ v`` given ``L = chol(S)``."""
    return solve_upper(L, solve_lower(L, v))


def logdet_from_chol(L: LowerBand) -> float:
    """``log |S|`` given ``L = chol(S)``."""
    return 2.0 * float(np.sum(np.log(L.data[0])))


def inverse_band_subset(L: LowerBand) -> SymBand:
    """Entries of ``S⁻¹`` inside the band of ``S``, from ``L = chol(S)``.

    Takahashi recurrences, sweeping columns from last to first: with ``Z = S⁻¹``,
    ``L_ii Z_ij = δ_ij / L_ii - Σ_{t≥1} L_{i+t,i} Z_{i+t,j}`` for ``j`` in the band below ``i``.
    Every ``Z`` entry on the right lies in the band and in a later column.
    """
    width, dim = L.width, L.dim
    ld = L.data
    zd = np.zeros_like(ld)
    offs = np.arange(1, width)
    # Z[i+t, i+e] lives at zd[|t-e|, i + min(t, e)]
    gap = np.abs(offs[:, None] - offs[None, :])
    low = np.minimum(offs[:, None], offs[None, :])
    for i in range(dim - 1, -1, -1):
        nb = min(width - 1, dim - 1 - i)
        inv_diag = 1.0 / ld[0, i]
        if nb > 0:
            column = ld[1 : nb + 1, i]
            block = zd[gap[:nb, :nb], i + low[:nb, :nb]]
            below = -inv_diag * (block @ column)
            zd[1 : nb + 1, i] = below
            zd[0, i] = inv_diag * inv_diag - inv_diag * float(column @ below)
        else:
            zd[0, i] = inv_diag * inv_diag
    return SymBand(zd)


def band_trace_product(P: SymBand, Q: SymBand) -> float:
    """``tr(P Q)`` from the shared band; exact when either operand is zero outside its band."""
    if P.dim != Q.dim:
        raise DimensionMismatchError(f"dims differ: {P.dim} vs {Q.dim}")
    w = min(P.width, Q.width)
    diag = float(P.data[0] @ Q.data[0])
    off = float(np.sum(P.data[1:w] * Q.data[1:w]))
    return diag + 2.0 * off


def band_axpby(alpha: float, P: SymBand, beta: float, Q: SymBand) -> SymBand:
    """``alpha P + beta Q`` with width ``max(width(P), width(Q))``."""
    if P.dim != Q.dim:
        raise DimensionMismatchError(f"dims differ: {P.dim} vs {Q.dim}")
    width = max(P.width, Q.width)
    data = np.zeros((width, P.dim))
    data[: P.width] += alpha * P.data
    data[: Q.width] += beta * Q.data
    return SymBand(data)


def band_combination(terms: Sequence[tuple[float, SymBand]]) -> SymBand:
    """Linear combination ``Σ c_i P_i`` of bands with a common dim."""
    coeff, first = terms[0]
    out = band_axpby(coeff, first, 0.0, first)
    for coeff, band in terms[1:]:
        out = band_axpby(1.0, out, coeff, band)
    return out


def kron_band(P: SymBand, Q: SymBand) -> SymBand:
    """Band of ``P ⊗ Q``, of width ``(width(P) - 1) dim(Q) + width(Q)``.

    Entry ``(i1 dim(Q) + i2, j1 dim(Q) + j2)`` equals ``P[i1, j1] Q[i2, j2]``.
    """
    m1, m2 = P.dim, Q.dim
    dim = m1 * m2
    width = min((P.width - 1) * m2 + Q.width, dim)
    data = np.zeros((width, dim))
    for d1 in range(P.width):
        for e in range(-(Q.width - 1), Q.width):
            offset = d1 * m2 + e
            if offset < 0 or offset >= width:
                continue
            if e >= 0:
                qrow = Q.data[e]
            else:
                qrow = np.concatenate([np.zeros(-e), Q.data[-e, : m2 + e]])
            # two (d1, e) pairs can share an offset but never a cell
            data[offset] += np.outer(P.data[d1], qrow).ravel()
    # rows past the end wrap into padding cells; clear them
    for d in range(1, width):
        data[d, dim - d :] = 0.0
    return SymBand(data)


def block_diag_band(blocks: Sequence[SymBand]) -> SymBand:
    """Block-diagonal band of square banded blocks."""
    width = max(b.width for b in blocks)
    dim = sum(b.dim for b in blocks)
    data = np.zeros((width, dim))
    start = 0
    for block in blocks:
        data[: block.width, start : start + block.dim] = block.data
        start += block.dim
    return SymBand(data)
