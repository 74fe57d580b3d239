import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from wpbc.errors import DomainError
from wpbc.specfun import (ce_inverse_quality, gamma0, gamma0_bounds, inv_chisquare_mean, phi,
                          phi_of_c, truncated_inverse_moment, truncated_inverse_moment_upper)

positive = st.floats(min_value=1e-8, max_value=600.0, allow_nan=False)


def test_gamma0_reference_values():
    assert gamma0(1.0) == pytest.approx(0.2193839344, rel=1e-10)
    assert gamma0(0.01) == pytest.approx(4.0379295765, rel=1e-9)


def test_gamma0_large_argument_inside_bounds():
    v = gamma0(50.0)
    assert 0.5 * math.exp(-50) * math.log(1.04) < v < math.exp(-50) * math.log(1.02)


def test_gamma0_against_scipy_across_regimes():
    x = np.geomspace(1e-8, 700, 400)
    np.testing.assert_allclose(gamma0(x), special.exp1(x), rtol=1e-13)


def test_gamma0_derivative():
    # d/dx E1(x) = -exp(-x)/x
    for x in (0.05, 0.7, 1.0, 3.0, 20.0):
        h = 1e-6 * x
        fd = (gamma0(x + h) - gamma0(x - h)) / (2 * h)
        assert fd == pytest.approx(-math.exp(-x) / x, rel=1e-6)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_gamma0_domain(x):
    with pytest.raises(DomainError):
        gamma0(x)


def test_bounds_at_one():
    lo, hi = gamma0_bounds(1.0)
    assert lo == pytest.approx(0.5 * math.exp(-1) * math.log(3))
    assert hi == pytest.approx(math.exp(-1) * math.log(2))
    assert lo == pytest.approx(0.2021, abs=1e-4) and hi == pytest.approx(0.2550, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(positive)
def test_bounds_bracket(x):
    lo, hi = gamma0_bounds(x)
    v = gamma0(x)
    assert lo < hi
    assert lo <= v <= hi


@settings(max_examples=100, deadline=None)
@given(positive, positive)
def test_gamma0_decreasing(a, b):
    if a == b:
        return
    lo, hi = sorted((a, b))
    assert gamma0(lo) > gamma0(hi)


def test_phi_of_c_values_and_limits():
    assert phi_of_c(1.0) == pytest.approx(math.e * special.exp1(1.0), rel=1e-12)
    assert phi_of_c(1.0) == pytest.approx(0.596347, abs=1e-6)
    assert phi_of_c(1e-9) < 1e-7
    assert phi_of_c(1e6) == pytest.approx(1.0, abs=1e-5)
    assert phi_of_c(math.inf) == 1.0


def test_phi_of_c_continuity_across_branches():
    for c in (1.0, 700.0):
        below, above = phi_of_c(c * (1 - 1e-12)), phi_of_c(c * (1 + 1e-12))
        assert below == pytest.approx(above, rel=1e-10)
    assert phi_of_c(650.0) == pytest.approx(650.0 * math.exp(650.0) * special.exp1(650.0), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1e4))
def test_phi_in_unit_interval_and_monotone(c):
    v = phi_of_c(c)
    assert 0 < v < 1
    assert phi_of_c(c * 1.5) > v


def test_phi_from_parameters():
    beta, alpha, p_ce, refl, k, s2 = 4e-5, 20, 0.5, 0.5, 2, 1e-12
    c = ce_inverse_quality(beta, alpha, p_ce, refl, k, s2)
    assert c == pytest.approx(k * s2 / (beta ** 2 * alpha * p_ce * refl))
    assert phi(beta, alpha, p_ce, refl, k, s2) == pytest.approx(phi_of_c(c))
    assert ce_inverse_quality(beta, 0, p_ce, refl, k, s2) == math.inf
    assert phi(beta, 0, p_ce, refl, k, s2) == 1.0


def test_truncated_inverse_moment_values():
    assert truncated_inverse_moment(1.0, 1.0) == pytest.approx(0.21938, abs=1e-5)
    assert truncated_inverse_moment(2.0, 2.0) == pytest.approx(0.10969, abs=1e-5)
    assert truncated_inverse_moment(1.0, 0.1) > truncated_inverse_moment(1.0, 0.2)


def test_truncated_inverse_moment_mc(rng):
    beta, tau = 2.0, 0.05
    x = rng.exponential(beta, 2_000_000)
    mc = np.mean(np.where(x >= tau, 1.0 / np.maximum(x, tau), 0.0))
    assert mc == pytest.approx(truncated_inverse_moment(beta, tau), rel=0.01)


def test_truncated_upper_envelope():
    for beta in (1e-5, 1.0, 3.0):
        for ratio in (1e-4, 1e-2, 0.5, 5.0):
            tau = ratio * beta
            assert truncated_inverse_moment_upper(beta, tau) > truncated_inverse_moment(beta, tau)


def test_inv_chisquare_mean():
    assert inv_chisquare_mean(2) == 0.5
    assert inv_chisquare_mean(11) == pytest.approx(0.05)
    with pytest.raises(DomainError):
        inv_chisquare_mean(1)


def test_inv_chisquare_mc(rng):
    z = rng.chisquare(6, 10**6)
    assert np.mean(1 / z) == pytest.approx(inv_chisquare_mean(3), rel=0.01)
