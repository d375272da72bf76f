"""Tests for bandgp.model against dense and exact references."""

import numpy as np
import pytest

import bandgp.model
from bandgp.banded import chol as banded_chol
from bandgp.constants import Family
from bandgp.constants import Structure
from bandgp.design import precompute
from bandgp.design import precompute_stats
from bandgp.exceptions import DimensionMismatchError
from bandgp.exceptions import InvalidConfigurationError
from bandgp.exceptions import InvalidDataError
from bandgp.exceptions import NotPositiveDefiniteError
from bandgp.model import build_kuu
from bandgp.model import collapsed_elbo
from bandgp.model import elbo_gradient
from bandgp.model import finalize
from bandgp.model import jitter_ladder
from bandgp.model import metrics
from bandgp.model import predict
from bandgp.oracle import dense_sgpr
from bandgp.oracle import exact_gp
from bandgp.rkhs_gram import MaternHyper
from bandgp.rkhs_gram import gram_components
from bandgp.splines import make_uniform_basis
from tests.helpers import STRUCTURE_DIMS
from tests.helpers import random_hyper
from tests.helpers import random_instance
from tests.helpers import regression_problem


def _hyper(family, lengthscale=4.0, amplitude=1.3, noise=0.05):
    return MaternHyper.create(family, lengthscale, amplitude, noise)


@pytest.mark.parametrize("family", list(Family))
def test_one_dimensional_matches_dense(rng, family):
    basis, x, y, stats, comp = regression_problem(rng, family)
    x_test = np.linspace(0.0, 16.0, 41)
    for hyper in [_hyper(family)] + [random_hyper(rng, family) for _ in range(4)]:
        reference = dense_sgpr(x, y, [basis], hyper, x_test=x_test)
        assert collapsed_elbo(stats, comp, hyper) == pytest.approx(reference.elbo, rel=1e-8)
        fit = finalize(stats, comp, hyper, bases=[basis])
        np.testing.assert_allclose(fit.m_hat, reference.m_hat, rtol=1e-6, atol=1e-8)
        mean, variance = predict(fit, x_test)
        np.testing.assert_allclose(mean, reference.mean, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(variance, reference.variance, rtol=1e-6, atol=1e-8)


def test_separable_matches_dense(rng):
    family = Family.MATERN12
    bx, by = make_uniform_basis((0.0, 6.0), 7, 1), make_uniform_basis((0.0, 5.0), 6, 1)
    X = np.column_stack([rng.uniform(0.0, 6.0, 150), rng.uniform(0.0, 5.0, 150)])
    y = np.sin(X[:, 0]) * np.cos(X[:, 1]) + 0.1 * rng.standard_normal(150)
    hyper = MaternHyper.create(family, [2.0, 3.0], [1.5, 1.0], 0.05)
    stats = precompute(Structure.SEPARABLE_2D, [bx, by], X, y)
    comps = [gram_components(bx, family), gram_components(by, family)]
    x_test = np.column_stack([rng.uniform(0.0, 6.0, 20), rng.uniform(0.0, 5.0, 20)])
    reference = dense_sgpr(X, y, [bx, by], hyper, structure=Structure.SEPARABLE_2D, x_test=x_test)

    assert collapsed_elbo(stats, comps, hyper) == pytest.approx(reference.elbo, rel=1e-8)
    fit = finalize(stats, comps, hyper, bases=[bx, by])
    mean, variance = predict(fit, x_test)
    np.testing.assert_allclose(mean, reference.mean, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(variance, reference.variance, rtol=1e-6, atol=1e-8)


def test_additive_matches_dense(rng):
    family = Family.MATERN32
    bases = [make_uniform_basis((0.0, 6.0), 8, 2) for _ in range(3)]
    X = rng.uniform(0.0, 6.0, (200, 3))
    y = np.sin(X[:, 0]) + np.cos(X[:, 1]) - 0.5 * X[:, 2] + 0.1 * rng.standard_normal(200)
    hyper = MaternHyper.create(family, [2.0, 3.0, 4.0], [0.5, 0.7, 1.2], 0.05)
    stats = precompute(Structure.ADDITIVE, bases, X, y)
    comps = [gram_components(b, family) for b in bases]
    x_test = rng.uniform(0.0, 6.0, (15, 3))
    reference = dense_sgpr(X, y, bases, hyper, structure=Structure.ADDITIVE, x_test=x_test)

    assert collapsed_elbo(stats, comps, hyper) == pytest.approx(reference.elbo, rel=1e-8)
    mean, variance = predict(finalize(stats, comps, hyper, bases=bases), x_test)
    np.testing.assert_allclose(mean, reference.mean, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(variance, reference.variance, rtol=1e-6, atol=1e-8)


STRUCTURES = list(STRUCTURE_DIMS)


@pytest.mark.parametrize("family", list(Family))
@pytest.mark.parametrize("structure", STRUCTURES)
def test_random_instances_match_dense(rng, family, structure):
    for _ in range(25):
        bases, X, y, hyper = random_instance(rng, family, structure)
        comps = [gram_components(b, family) for b in bases]
        stats = precompute(structure, bases, X, y)
        widths = np.array([b.domain[1] for b in bases])
        x_test = rng.uniform(0.0, 1.0, (12, len(bases))) * widths
        if structure is Structure.ONE_D:
            x_test = x_test[:, 0]
        reference = dense_sgpr(X, y, bases, hyper, structure=structure, x_test=x_test, subintervals=400)

        assert collapsed_elbo(stats, comps, hyper) == pytest.approx(reference.elbo, rel=1e-8, abs=1e-10 * len(y))
        fit = finalize(stats, comps, hyper, bases=bases)
        scale = np.max(np.abs(reference.m_hat)) + 1.0
        np.testing.assert_allclose(fit.m_hat, reference.m_hat, rtol=1e-6, atol=1e-7 * scale)
        mean, variance = predict(fit, x_test)
        kappa = fit.kappa
        np.testing.assert_allclose(mean, reference.mean, rtol=1e-6, atol=1e-7 * (np.max(np.abs(reference.mean)) + 1.0))
        np.testing.assert_allclose(variance, reference.variance, rtol=1e-6, atol=1e-7 * kappa)


@pytest.mark.parametrize("family", list(Family))
@pytest.mark.parametrize("structure", STRUCTURES)
def test_bound_lies_below_exact_marginal(rng, family, structure):
    for _ in range(20):
        bases, X, y, hyper = random_instance(rng, family, structure)
        comps = [gram_components(b, family) for b in bases]
        stats = precompute(structure, bases, X, y)
        logml, _, _ = exact_gp(X, y, hyper, structure=structure)
        assert collapsed_elbo(stats, comps, hyper) <= logml + 1e-8 * abs(logml)


def test_refined_basis_never_lowers_bound(rng):
    family = Family.MATERN12
    x = rng.uniform(0.0, 8.0, 300)
    y = np.sin(x) + 0.1 * rng.standard_normal(300)
    hyper = _hyper(family, lengthscale=2.0)
    values = []
    for intervals in (8, 16, 32):
        basis = make_uniform_basis((0.0, 8.0), intervals + 1, 1)
        values.append(collapsed_elbo(precompute_stats(basis, x, y), gram_components(basis, family), hyper))
    assert values[0] <= values[1] + 1e-8 * abs(values[1])
    assert values[1] <= values[2] + 1e-8 * abs(values[2])


def test_empty_statistics_give_zero():
    basis = make_uniform_basis((0.0, 5.0), 7, 2)
    stats = precompute_stats(basis, np.empty(0), np.empty(0))
    assert collapsed_elbo(stats, gram_components(basis, Family.MATERN32), _hyper(Family.MATERN32)) == 0.0


def test_prediction_outside_domain_is_prior(rng):
    family = Family.MATERN32
    basis, _, _, stats, comp = regression_problem(rng, family)
    hyper = _hyper(family)
    mean, variance = predict(finalize(stats, comp, hyper, bases=[basis]), [-3.0, 20.0])
    np.testing.assert_array_equal(mean, [0.0, 0.0])
    np.testing.assert_allclose(variance, hyper.amplitudes[0])


def test_variance_is_bounded_by_prior(rng):
    family = Family.MATERN12
    basis, _, _, stats, comp = regression_problem(rng, family, n=2000)
    hyper = _hyper(family)
    _, variance = predict(finalize(stats, comp, hyper, bases=[basis]), np.linspace(0.0, 16.0, 500))
    assert np.all(variance > 0.0)
    assert np.all(variance <= hyper.amplitudes[0] * (1 + 1e-10))


def test_fit_check_and_prediction_requirements(rng):
    family = Family.MATERN32
    basis, _, _, stats, comp = regression_problem(rng, family)
    fit = finalize(stats, comp, _hyper(family), bases=[basis])
    fit.check()
    with pytest.raises(InvalidConfigurationError):
        predict(finalize(stats, comp, _hyper(family)), [1.0])
    with pytest.raises(InvalidDataError):
        predict(fit, [1.0, np.inf])


def test_mismatched_components(rng):
    basis, _, _, stats, _ = regression_problem(rng, Family.MATERN32)
    other = make_uniform_basis((0.0, 16.0), 17, 2)
    with pytest.raises(InvalidConfigurationError):
        collapsed_elbo(stats, gram_components(other, Family.MATERN32), _hyper(Family.MATERN32))
    with pytest.raises(InvalidConfigurationError):
        finalize(stats, gram_components(basis, Family.MATERN32), _hyper(Family.MATERN32), bases=[other])
    two_dims = MaternHyper.create(Family.MATERN32, [1.0, 1.0], [1.0, 1.0], 0.1)
    with pytest.raises(DimensionMismatchError):
        build_kuu(Structure.ONE_D, gram_components(basis, Family.MATERN32), two_dims)


def test_gradient_is_step_consistent(rng):
    family = Family.MATERN32
    _, _, _, stats, comp = regression_problem(rng, family)
    hyper = _hyper(family)
    coarse = elbo_gradient(stats, comp, hyper, step=1e-4)
    fine = elbo_gradient(stats, comp, hyper, step=1e-5)
    np.testing.assert_allclose(coarse, fine, rtol=1e-4, atol=1e-4)


def test_gradient_near_noise_floor_is_finite(rng):
    family = Family.MATERN12
    _, _, _, stats, comp = regression_problem(rng, family)
    hyper = _hyper(family, noise=1e-8)
    assert np.all(np.isfinite(elbo_gradient(stats, comp, hyper)))


def test_jitter_ladder():
    ladder = jitter_ladder(2.0)
    assert ladder[0] == 0.0
    assert ladder[1] == pytest.approx(2e-10)
    assert ladder[-1] == pytest.approx(2e-4)
    assert len(ladder) == 8


def test_jitter_escalates_after_failure(rng, mocker):
    family = Family.MATERN32
    basis, _, _, stats, comp = regression_problem(rng, family)
    hyper = _hyper(family)
    calls = {"count": 0}

    def flaky(band):
        calls["count"] += 1
        if calls["count"] == 1:
            raise NotPositiveDefiniteError("forced", pivot=0)
        return banded_chol(band)

    mocker.patch("bandgp.model.chol", side_effect=flaky)
    fit = finalize(stats, comp, hyper, bases=[basis])
    mean_diag = float(np.mean(build_kuu(Structure.ONE_D, comp, hyper).diagonal()))
    assert fit.jitter == pytest.approx(1e-10 * mean_diag)


def test_exhausted_jitter_ladder(rng, mocker):
    family = Family.MATERN12
    _, _, _, stats, comp = regression_problem(rng, family)
    mocker.patch.object(bandgp.model, "chol", side_effect=NotPositiveDefiniteError("forced", pivot=3))
    with pytest.raises(NotPositiveDefiniteError) as info:
        collapsed_elbo(stats, comp, _hyper(family))
    assert info.value.pivot == 3


def test_metrics_standard_normal():
    hyper = _hyper(Family.MATERN12, noise=0.25)
    mse, nlpd = metrics([0.0], [0.0], [0.75], hyper)
    assert mse == 0.0
    assert nlpd == pytest.approx(0.5 * np.log(2 * np.pi), abs=1e-4)
    mse, nlpd = metrics([1.0, -1.0], [0.0, 0.0], [0.75, 0.75], hyper)
    assert mse == 1.0
    assert nlpd == pytest.approx(0.5 * np.log(2 * np.pi) + 0.5, abs=1e-12)


def test_metrics_validation():
    hyper = _hyper(Family.MATERN12)
    with pytest.raises(InvalidDataError):
        metrics([], [], [], hyper)
    with pytest.raises(DimensionMismatchError):
        metrics([1.0], [1.0, 2.0], [1.0], hyper)


@pytest.mark.parametrize("family", list(Family))
def test_well_conditioned_fit_needs_no_jitter(rng, family):
    basis, _, _, stats, comp = regression_problem(rng, family, num_basis=64, n=1000)
    hyper = _hyper(family, lengthscale=basis.spacing, amplitude=1.0, noise=0.1)
    assert finalize(stats, comp, hyper, bases=[basis]).jitter == 0.0
