import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from privgibbs.distributions import (RngStream, check_simplex, laplace_log_density,
                                     sample_categorical, sample_dirichlet, sample_laplace,
                                     sample_multinomial, sample_mvnormal)
from privgibbs.errors import FactorizationError, ParameterError


def test_stream_reproducible():
    a = RngStream(42, 3).random(1000)
    b = RngStream(42, 3).random(1000)
    assert np.array_equal(a, b)


def test_streams_differ_by_id_and_seed():
    base = RngStream(42, 3).random(100)
    assert not np.array_equal(base, RngStream(42, 4).random(100))
    assert not np.array_equal(base, RngStream(43, 3).random(100))
    assert np.array_equal(RngStream(42, (3,)).random(100), base)


def test_distinct_streams_uncorrelated():
    a = RngStream(1, 0).standard_normal(100000)
    b = RngStream(1, 1).standard_normal(100000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.015


def test_derive_matches_nested_id():
    assert np.array_equal(RngStream(5, (1,)).derive(2, 3).random(10),
                          RngStream(5, (1, 2, 3)).random(10))


def test_negative_seed_rejected():
    with pytest.raises(ParameterError):
        RngStream(-1)


# -- Laplace ------------------------------------------------------------------


def test_laplace_noise_scale_loglinear():
    # scale 2K/eps with K=5, eps=1
    x = sample_laplace(0.0, 10.0, RngStream(0), size=200000)
    assert abs(np.mean(np.abs(x)) - 10.0) < 0.1


def test_laplace_moments():
    x = sample_laplace(0.0, 1.0, RngStream(1), size=10**6)
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 2.0) < 0.05


def test_laplace_location_shift():
    a = sample_laplace(0.0, 2.0, RngStream(2), size=100)
    b = sample_laplace(3.5, 2.0, RngStream(2), size=100)
    np.testing.assert_allclose(b - a, 3.5, rtol=0, atol=1e-12)


def test_laplace_scalar_draw_finite():
    x = sample_laplace(0.0, 1.0, RngStream(3))
    assert np.isfinite(x)


@pytest.mark.parametrize("scale", [0.0, -1.0])
def test_laplace_rejects_bad_scale(scale):
    with pytest.raises(ParameterError):
        sample_laplace(0.0, scale, RngStream(0))
    with pytest.raises(ParameterError):
        laplace_log_density(0.0, 0.0, scale)


def test_laplace_log_density_values():
    assert laplace_log_density(0.0, 0.0, 1.0) == pytest.approx(-math.log(2.0), abs=1e-15)
    assert laplace_log_density(1.0, 0.0, 1.0) == pytest.approx(-1.0 - math.log(2.0), abs=1e-15)
    assert laplace_log_density(0.0 + 3.7, 0.0 + 3.7, 1.3) == laplace_log_density(0.0, 0.0, 1.3)


def test_laplace_log_density_integrates_to_one():
    z = np.linspace(-60, 60, 600001)
    dens = np.exp(laplace_log_density(z, 0.4, 2.5))
    assert trapezoid(dens, z) == pytest.approx(1.0, abs=1e-6)


# -- Dirichlet ------------------------------------------------------------------


def test_dirichlet_symmetric_mean():
    draws = sample_dirichlet(np.full(5, 2.0), RngStream(4), size=100000)
    assert np.all(np.abs(draws.mean(axis=0) - 0.2) < 0.005)


def test_dirichlet_concentration_limit():
    draws = sample_dirichlet([1e6, 1e6], RngStream(5), size=100)
    assert np.all(np.abs(draws - 0.5) < 0.01)


def test_dirichlet_sums_to_one():
    draws = sample_dirichlet([3.0, 1.0, 7.0], RngStream(6), size=1000)
    assert np.all(np.abs(draws.sum(axis=1) - 1.0) <= 1e-12)
    assert np.all(draws >= 0)


def test_dirichlet_variance():
    alpha = np.array([3.0, 1.0, 7.0])
    a0 = alpha.sum()
    draws = sample_dirichlet(alpha, RngStream(7), size=100000)
    expected = alpha * (a0 - alpha) / (a0 ** 2 * (a0 + 1))
    np.testing.assert_allclose(draws.var(axis=0), expected, rtol=0.03)


def test_dirichlet_batch_shape():
    alpha = np.full((4, 2, 3), 2.0)
    draws = sample_dirichlet(alpha, RngStream(8))
    assert draws.shape == (4, 2, 3)
    np.testing.assert_allclose(draws.sum(axis=-1), 1.0, atol=1e-12)


@pytest.mark.parametrize("alpha", [[1.0, 0.0], [1.0, -2.0], []])
def test_dirichlet_rejects_bad_alpha(alpha):
    with pytest.raises(ParameterError):
        sample_dirichlet(alpha, RngStream(0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 50.0), min_size=1, max_size=8), st.integers(0, 2**32))
def test_dirichlet_always_on_simplex(alpha, seed):
    p = sample_dirichlet(alpha, RngStream(seed))
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-12


# -- multinomial and categorical -------------------------------------------------


def test_multinomial_empty():
    assert np.array_equal(sample_multinomial(0, [0.2, 0.8], RngStream(0)), [0, 0])


def test_multinomial_degenerate():
    assert np.array_equal(sample_multinomial(7, [1.0, 0.0, 0.0], RngStream(0)), [7, 0, 0])


def test_multinomial_proportion():
    counts = sample_multinomial(100000, [0.3, 0.7], RngStream(9))
    assert counts.sum() == 100000
    assert abs(counts[0] / 100000 - 0.3) < 0.01


@pytest.mark.parametrize("probs", [[0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0]])
def test_multinomial_rejects_bad_simplex(probs):
    with pytest.raises(ParameterError):
        sample_multinomial(3, probs, RngStream(0))


def test_check_simplex_accepts_valid():
    check_simplex([0.25, 0.75])


def test_categorical_inverse_cdf():
    cdf = np.cumsum([0.2, 0.0, 0.5, 0.3])
    u = np.array([0.0, 0.1999, 0.2, 0.6999, 0.7, 0.999999])
    assert sample_categorical(cdf, u).tolist() == [0, 0, 2, 2, 3, 3]


def test_categorical_frequencies():
    probs = np.array([0.1, 0.6, 0.3])
    u = RngStream(10).random(100000)
    freq = np.bincount(sample_categorical(np.cumsum(probs), u), minlength=3) / 100000
    assert np.all(np.abs(freq - probs) < 0.01)


# -- multivariate normal -----------------------------------------------------------


def test_mvnormal_mean():
    draws = sample_mvnormal([0.9, -1.17], np.eye(2), RngStream(11), size=100000)
    assert np.all(np.abs(draws.mean(axis=0) - [0.9, -1.17]) < 0.02)


def test_mvnormal_degenerate_cov():
    draws = sample_mvnormal([1.0, 2.0], 1e-18 * np.eye(2), RngStream(12), size=10)
    assert np.all(np.abs(draws - [1.0, 2.0]) < 1e-8)


def test_mvnormal_covariance():
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    draws = sample_mvnormal([0.0, 0.0], cov, RngStream(13), size=100000)
    assert np.all(np.abs(np.cov(draws.T) - cov) < 0.05)


def test_mvnormal_not_positive_definite():
    with pytest.raises(FactorizationError):
        sample_mvnormal([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], RngStream(0))


def test_mvnormal_single_draw_shape():
    assert sample_mvnormal([0.0, 0.0, 0.0], np.eye(3), RngStream(0)).shape == (3,)
