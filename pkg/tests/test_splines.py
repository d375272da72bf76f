"""Tests for bandgp.splines."""

import numpy as np
import pytest

from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import InvalidDomainError
from bandgp.exceptions import InvalidOrderError
from bandgp.oracle import cardinal_spline
from bandgp.splines import SplineBasis
from bandgp.splines import active_at
from bandgp.splines import eval as eval_basis
from bandgp.splines import eval_derivative
from bandgp.splines import make_uniform_basis


def test_uniform_knots():
    basis = make_uniform_basis((0.0, 10.0), num_basis=11, order=1)
    np.testing.assert_array_equal(basis.knots, np.arange(-1.0, 12.0))
    assert basis.n_intervals == 10
    assert basis.spacing == 1.0


def test_knots_hit_domain_ends_exactly():
    basis = make_uniform_basis((0.1, 0.7), num_basis=13, order=3)
    assert basis.knots[3] == 0.1
    assert basis.knots[3 + basis.n_intervals] == 0.7


@pytest.mark.parametrize(
    "domain, num_basis, order, error",
    [
        ((1.0, 1.0), 5, 1, InvalidDomainError),
        ((2.0, 1.0), 5, 1, InvalidDomainError),
        ((0.0, np.inf), 5, 1, InvalidDomainError),
        ((0.0, 1.0), 2, 2, InvalidConfigurationError),
        ((0.0, 1.0), 10, 4, InvalidConfigurationError),
    ],
)
def test_invalid_basis(domain, num_basis, order, error):
    with pytest.raises(error):
        make_uniform_basis(domain, num_basis, order)


def test_knots_are_read_only():
    basis = make_uniform_basis((0.0, 1.0), 8, 2)
    with pytest.raises(ValueError):
        basis.knots[0] = 5.0


@pytest.mark.parametrize("order", [0, 1, 2, 3])
def test_partition_of_unity(rng, order):
    basis = make_uniform_basis((-2.0, 3.0), num_basis=17, order=order)
    x = np.concatenate([rng.uniform(-2.0, 3.0, 10_000), [-2.0, 3.0]])
    _, values, inside = basis.active_window(x)
    assert inside.all()
    np.testing.assert_allclose(values.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert (values >= -1e-15).all()


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_of_partition_vanish(rng, order):
    basis = make_uniform_basis((0.0, 5.0), num_basis=12, order=order)
    x = rng.uniform(0.0, 5.0, 1000)
    for r in range(1, order + 1):
        _, values, _ = basis.active_window(x, r)
        np.testing.assert_allclose(values.sum(axis=1), 0.0, atol=1e-9)


def test_active_at_interior():
    basis = make_uniform_basis((0.0, 10.0), num_basis=11, order=1)
    first, values = active_at(basis, 2.5)
    assert first == 2
    np.testing.assert_allclose(values, [0.5, 0.5])


def test_quadratic_values_at_knot_and_midpoint():
    basis = make_uniform_basis((0.0, 10.0), num_basis=12, order=2)
    first, values = active_at(basis, 3.0)
    assert first == 3
    np.testing.assert_allclose(values, [0.5, 0.5, 0.0], atol=1e-15)
    first, values = active_at(basis, 3.5)
    assert first == 3
    np.testing.assert_allclose(values, [0.125, 0.75, 0.125], atol=1e-15)


def test_right_end_belongs_to_last_interval():
    basis = make_uniform_basis((0.0, 10.0), num_basis=11, order=1)
    first, values = active_at(basis, 10.0)
    assert first == 9
    np.testing.assert_allclose(values, [0.0, 1.0])


def test_outside_domain_is_empty():
    basis = make_uniform_basis((0.0, 1.0), num_basis=6, order=2)
    for x in (-0.1, 1.1):
        first, values = active_at(basis, x)
        assert first == -1
        assert values.size == 0
        assert eval_basis(basis, 2, x) == 0.0


@pytest.mark.parametrize("order", [1, 2])
def test_matches_closed_forms(rng, order):
    basis = make_uniform_basis((0.0, 12.0), num_basis=12 + order, order=order)
    x = rng.uniform(0.0, 12.0, 500)
    for r in range(order + 1):
        tol = 1e-13 if r == 0 else 1e-11
        for m in range(basis.num_basis):
            np.testing.assert_allclose(
                eval_derivative(basis, m, x, r), cardinal_spline(basis, m, x, r), rtol=0, atol=tol
            )


def test_scalar_and_array_returns():
    basis = make_uniform_basis((0.0, 4.0), num_basis=6, order=2)
    assert isinstance(eval_basis(basis, 1, 0.7), float)
    assert eval_basis(basis, 1, np.array([0.7, 1.2])).shape == (2,)


def test_derivative_order_above_spline_order():
    basis = make_uniform_basis((0.0, 4.0), num_basis=6, order=2)
    with pytest.raises(InvalidOrderError):
        eval_derivative(basis, 1, 0.5, 3)


def test_support_is_local():
    basis = make_uniform_basis((0.0, 8.0), num_basis=10, order=2)
    x = np.linspace(0.0, 8.0, 801)
    values = eval_basis(basis, 5, x)
    support = (x >= basis.knots[5]) & (x <= basis.knots[8])
    assert np.all(values[~support] == 0.0)
    assert np.all(values[support][1:-1] > 0.0)


def test_spec_round_trip():
    basis = make_uniform_basis((-1.0, 2.5), num_basis=9, order=3)
    rebuilt = SplineBasis.from_spec(basis.spec())
    assert rebuilt.fingerprint() == basis.fingerprint()
    np.testing.assert_array_equal(rebuilt.knots, basis.knots)
    assert make_uniform_basis((-1.0, 2.5), 10, 3).fingerprint() != basis.fingerprint()
