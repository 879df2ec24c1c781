import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gausslike.errors import DomainError
from gausslike.specfun import (
    SQRT_2PI,
    Tolerance,
    gauss_cdf,
    gauss_cdf_inv,
    gauss_pdf,
    gauss_tail,
    gauss_tail_inv,
    gauss_tail_scaled,
)

# 30-digit adaptive quadrature (mpmath) of the defining integrals
CDF_AT_ONE = 0.841344746068542948585232545632
TAIL_AT_ZERO = 1.25331413731550025120788264241


def test_cdf_anchor_values():
    assert gauss_cdf(0.0) == 0.5
    assert gauss_cdf(math.inf) == 1.0
    assert gauss_cdf(-math.inf) == 0.0
    assert abs(gauss_cdf(1.0) - CDF_AT_ONE) <= 1e-10


def test_cdf_inv_anchor_values():
    assert abs(gauss_cdf_inv(0.5)) <= 1e-15
    assert abs(gauss_cdf_inv(gauss_cdf(2.0)) - 2.0) <= 1e-9
    assert abs(gauss_cdf_inv(0.841344746) - 1.0) <= 1e-8


def test_tail_anchor_values():
    assert abs(gauss_tail(-math.inf) - SQRT_2PI) <= 1e-15
    assert gauss_tail(math.inf) == 0.0
    assert abs(gauss_tail(0.0) - TAIL_AT_ZERO) <= 1e-14
    assert abs(gauss_tail_inv(TAIL_AT_ZERO)) <= 1e-9
    assert abs(gauss_tail_inv(gauss_tail(1.3)) - 1.3) <= 1e-9


def test_tail_matches_complement_on_grid():
    y = np.linspace(-8.0, 8.0, 10_000)
    assert np.max(np.abs(gauss_tail(y) - SQRT_2PI * (1.0 - gauss_cdf(y)))) <= 1e-12


def test_scaled_tail_is_mills_ratio():
    t = np.array([-3.0, 0.0, 2.0, 10.0, 30.0])
    ref = gauss_tail(t) * np.exp(0.5 * t * t)
    assert np.allclose(gauss_tail_scaled(t), ref, rtol=1e-13)
    # far tail: 1/t (1 - 1/t^2 + 3/t^4)
    t = 1e3
    assert abs(gauss_tail_scaled(t) - (1 - 1 / t**2 + 3 / t**4) / t) <= 1e-15 / t


def test_pdf_is_derivative_of_cdf():
    y = np.linspace(-5, 5, 41)
    h = 1e-5
    fd = (gauss_cdf(y + h) - gauss_cdf(y - h)) / (2 * h)
    assert np.max(np.abs(fd - gauss_pdf(y))) <= 1e-9


def test_round_trip_lower_and_central_range():
    y = np.linspace(-8.0, 5.0, 2601)
    assert np.max(np.abs(gauss_cdf_inv(gauss_cdf(y)) - y)) <= 1e-8


def test_round_trip_tail_pair():
    y = np.linspace(-5.0, 8.0, 2601)
    assert np.max(np.abs(gauss_tail_inv(gauss_tail(y)) - y)) <= 1e-8


def test_upper_range_is_covered_by_the_tail_pair():
    # E(y) rounds to within 1e-16 of 1 for y > 5; invert through the tail instead
    y = np.linspace(5.0, 8.0, 301)
    assert np.max(np.abs(gauss_tail_inv(SQRT_2PI * (1.0 - gauss_cdf(y))) - y)) <= 5e-2
    assert np.max(np.abs(-gauss_cdf_inv(gauss_cdf(-y)) - y)) <= 1e-8


def test_extreme_arguments():
    assert abs(gauss_cdf_inv(1e-300) - (-37.0471)) < 1e-3
    assert gauss_tail_inv(1e-300) > 37.0


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_cdf_inv_domain(p):
    with pytest.raises(DomainError):
        gauss_cdf_inv(p)


@pytest.mark.parametrize("m", [0.0, SQRT_2PI, -1.0, 3.0])
def test_tail_inv_domain(m):
    with pytest.raises(DomainError):
        gauss_tail_inv(m)


@pytest.mark.parametrize("kw", [{"abs_tol": 0.0}, {"rel_tol": 1.0}, {"max_iter": 0}, {"max_iter": 1.5}])
def test_tolerance_validation(kw):
    with pytest.raises(DomainError):
        Tolerance(**kw)


@given(st.floats(-8, 8), st.floats(-8, 8))
def test_monotonicity(a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    if hi - lo < 1e-9:
        return
    assert gauss_cdf(lo) < gauss_cdf(hi)
    assert gauss_tail(lo) > gauss_tail(hi)


@given(st.floats(1e-12, SQRT_2PI * (1 - 1e-9)))
def test_tail_inverse_brackets(m):
    t = gauss_tail_inv(m)
    assert gauss_tail(t + 1e-6) < m < gauss_tail(t - 1e-6)


@given(st.floats(1e-300, 0.5))
def test_cdf_inverse_relative_accuracy(p):
    y = gauss_cdf_inv(p)
    assert abs(gauss_cdf(y) - p) <= 1e-12 * p
