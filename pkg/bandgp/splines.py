"""Uniform B-spline bases.

A basis of order ``k`` on ``[a, b]`` splits the domain into ``M - k`` equal intervals and
extends the knot vector ``k`` intervals past each end, so every point of the domain sees exactly
``k + 1`` nonzero basis functions summing to one.

Values come from the Cox-de Boor triangle evaluated on the knot interval containing ``x``;
derivatives apply the recurrence

    dB_{m,q}/dx = q / (v_{m+q} - v_m) B_{m,q-1} - q / (v_{m+q+1} - v_{m+1}) B_{m+1,q-1}

``r`` times on top of the order ``k - r`` values. Knot intervals are half-open ``[v_i, v_{i+1})``
except the last interval inside the domain, which also owns ``x = b``.

Example:
    >>> basis = make_uniform_basis((0.0, 10.0), num_basis=11, order=1)
    >>> first, values = active_at(basis, 2.5)
    >>> first, values
    (2, array([0.5, 0.5]))
"""

import hashlib
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from bandgp.constants import KNOT_RTOL
from bandgp.constants import MAX_ORDER
from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import InvalidDomainError
from bandgp.exceptions import InvalidOrderError


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Immutable uniform B-spline basis.

    Attributes:
        order: Spline order ``k`` (polynomial degree).
        knots: Strictly increasing knot vector of length ``n_intervals + 2k + 1``.
        domain: Closed interval ``(a, b)``.
        num_basis: Number of basis functions ``M = n_intervals + k``.
    """

    order: int
    knots: np.ndarray = field(repr=False)
    domain: tuple[float, float]
    num_basis: int

    def __post_init__(self):
        """Check the domain, sizes and order."""
        a, b = self.domain
        if not a < b:
            raise InvalidDomainError(f"domain must satisfy a < b, got {self.domain}")
        if not 0 <= self.order <= MAX_ORDER:
            raise InvalidConfigurationError(f"spline order must be in [0, {MAX_ORDER}], got {self.order}")
        if self.num_basis != self.n_intervals + self.order:
            raise InvalidConfigurationError("num_basis must equal the interior interval count plus the order")
        steps = np.diff(self.knots)
        if np.any(steps <= 0):
            raise InvalidConfigurationError("knots must be strictly increasing")
        if np.max(np.abs(steps - self.spacing)) > KNOT_RTOL * max(abs(a), abs(b), self.spacing) * 4:
            raise InvalidConfigurationError("knots must be uniformly spaced")
        self.knots.setflags(write=False)

    @property
    def n_intervals(self) -> int:
        """Number of knot intervals inside the domain."""
        return len(self.knots) - 2 * self.order - 1

    @property
    def spacing(self) -> float:
        """Knot spacing ``h``."""
        a, b = self.domain
        return (b - a) / self.n_intervals

    def spec(self) -> dict:
        """Serializable description from which the basis can be rebuilt."""
        return {
            "domain": [float(self.domain[0]), float(self.domain[1])],
            "num_basis": self.num_basis,
            "order": self.order,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "SplineBasis":
        """Rebuild a basis from :meth:`spec` output."""
        return make_uniform_basis(tuple(spec["domain"]), spec["num_basis"], spec["order"])

    def fingerprint(self) -> str:
        """Stable short hash of the knot vector and order."""
        digest = hashlib.sha256()
        digest.update(np.int64(self.order).tobytes())
        digest.update(np.ascontiguousarray(self.knots, dtype=np.float64).tobytes())
        return digest.hexdigest()[:16]

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Knot interval index of each point and a mask of points inside the domain.

        Returns:
            tuple: ``(mu, inside)`` where ``knots[mu] <= x < knots[mu + 1]`` for inside points
            (``x = b`` maps to the last interval of the domain). ``mu`` is clipped for outside
            points so it can still be used as an index.
        """
        x = np.asarray(x, dtype=np.float64)
        a, b = self.domain
        k = self.order
        inside = (x >= a) & (x <= b)
        mu = np.searchsorted(self.knots, x, side="right") - 1
        mu = np.clip(mu, k, k + self.n_intervals - 1)
        return mu, inside

    def active_window(self, x, r: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized active values (or ``r``-th derivatives) at many points.

        Args:
            x: Points, any shape broadcastable to 1D.
            r: Derivative order, ``0 <= r <= k``. For ``r = k`` this is the weak derivative.

        Returns:
            tuple: ``(first, values, inside)`` with ``first`` the index of the first active
            function, ``values`` of shape ``(n, k + 1)`` and ``inside`` the domain mask. Rows of
            outside points are zero.

        Raises:
            InvalidOrderError: If ``r > k`` or ``r < 0``.
        """
        k = self.order
        if not 0 <= r <= k:
            raise InvalidOrderError(f"derivative order {r} not in [0, {k}]")
        x = np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel()
        mu, inside = self.locate(x)
        low = _cox_de_boor(self.knots, mu, x, k - r)
        if r > 0:
            low = np.einsum("npq,nq->np", _derivative_map(self.knots, mu, k, r), low)
        low[~inside] = 0.0
        return mu - k, low, inside


def make_uniform_basis(domain, num_basis: int, order: int) -> SplineBasis:
    """Build a uniform basis of ``num_basis`` splines of order ``order`` on ``domain``.

    Args:
        domain: Interval ``(a, b)`` with ``a < b``.
        num_basis: Number of basis functions ``M``; must exceed ``order``.
        order: Spline order ``k`` in ``[0, 3]``.

    Returns:
        SplineBasis: Basis with ``M - k`` interior intervals of width ``(b - a) / (M - k)``.

    Raises:
        InvalidConfigurationError: If ``M <= k`` or the order is out of range.
        InvalidDomainError: If ``a >= b`` or an end point is not finite.

    Example:
        >>> make_uniform_basis((0.0, 10.0), num_basis=11, order=1).knots
        array([-1.,  0.,  1.,  2.,  3.,  4.,  5.,  6.,  7.,  8.,  9., 10., 11.])
    """
    a, b = float(domain[0]), float(domain[1])
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise InvalidDomainError(f"domain must be finite with a < b, got ({a}, {b})")
    if num_basis <= order:
        raise InvalidConfigurationError(f"num_basis ({num_basis}) must exceed the spline order ({order})")
    if not 0 <= order <= MAX_ORDER:
        raise InvalidConfigurationError(f"spline order must be in [0, {MAX_ORDER}], got {order}")
    n_intervals = num_basis - order
    h = (b - a) / n_intervals
    knots = a + h * np.arange(-order, n_intervals + order + 1, dtype=np.float64)
    knots[order] = a
    knots[order + n_intervals] = b
    return SplineBasis(order=order, knots=knots, domain=(a, b), num_basis=num_basis)


def eval(basis: SplineBasis, m: int, x):
    """Value of the ``m``-th basis function ``B_{m,k}(x)``; zero outside its support and outside the domain."""
    return eval_derivative(basis, m, x, 0)


def eval_derivative(basis: SplineBasis, m: int, x, r: int):
    """``r``-th (weak) derivative of ``B_{m,k}`` at ``x``.

    Scalars in give a float back; arrays give an array of the same length.

    Raises:
        InvalidOrderError: If ``r > k``.
    """
    first, values, _ = basis.active_window(x, r)
    slot = m - first
    hit = (slot >= 0) & (slot <= basis.order)
    out = np.where(hit, values[np.arange(len(first)), np.clip(slot, 0, basis.order)], 0.0)
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def active_at(basis: SplineBasis, x: float) -> tuple[int, np.ndarray]:
    """The ``k + 1`` consecutive functions active at ``x`` and their values.

    Returns:
        tuple: ``(first_index, values)``; ``(-1, empty array)`` when ``x`` is outside the domain.
    """
    first, values, inside = basis.active_window(x)
    if not inside[0]:
        return -1, np.empty(0)
    return int(first[0]), values[0]


def _cox_de_boor(knots: np.ndarray, mu: np.ndarray, x: np.ndarray, degree: int) -> np.ndarray:
    """Values of ``B_{mu-degree..mu, degree}`` at ``x`` (one row per point)."""
    n = len(x)
    values = np.zeros((n, degree + 1))
    values[:, 0] = 1.0
    left = np.empty((n, degree + 1))
    right = np.empty((n, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - knots[mu + 1 - j]
        right[:, j] = knots[mu + j] - x
        saved = np.zeros(n)
        for r in range(j):
            temp = values[:, r] / (right[:, r + 1] + left[:, j - r])
            values[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        values[:, j] = saved
    return values


def _derivative_map(knots: np.ndarray, mu: np.ndarray, k: int, r: int) -> np.ndarray:
    """Per-point matrices mapping order ``k - r`` active values to ``r``-th derivatives of order ``k``."""
    n = len(mu)
    coeffs = np.broadcast_to(np.eye(k + 1), (n, k + 1, k + 1)).copy()
    for q in range(k, k - r, -1):
        # columns of `coeffs` index B_{mu-q+j, q}; the new ones index B_{mu-q+1+j, q-1}
        reduced = np.empty((n, k + 1, q))
        for j in range(q):
            m_new = mu - q + 1 + j
            # both neighbours share the factor q / (v_{n+q} - v_n)
            scale = q / (knots[m_new + q] - knots[m_new])
            reduced[:, :, j] = (coeffs[:, :, j + 1] - coeffs[:, :, j]) * scale[:, None]
        coeffs = reduced
    return coeffs
