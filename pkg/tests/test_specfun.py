import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_amp.specfun import (
    bessel_j,
    bessel_j_miller,
    bessel_j_series,
    default_kmax,
    jacobi_anger_coeffs,
    jacobi_anger_orders,
)


def test_j0_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0


def test_j1_at_184_against_independent_paths():
    val = bessel_j(1, 1.84)
    assert abs(val - bessel_j_series(1, 1.84)) < 1e-10
    assert abs(val - bessel_j_miller(5, 1.84)[1]) < 1e-10


@pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 17.3, 33.0, 49.9])
def test_production_matches_miller_over_range(x):
    ref = bessel_j_miller(60, x)
    got = np.array([bessel_j(k, x) for k in range(61)])
    assert np.max(np.abs(got - ref)) < 1e-12


@pytest.mark.parametrize("x", [0.3, 2.0, 6.5])
def test_series_and_miller_agree(x):
    ref = bessel_j_miller(15, x)
    for k in range(16):
        assert abs(bessel_j_series(k, x) - ref[k]) < 1e-12


def test_miller_negative_argument():
    pos = bessel_j_miller(6, 2.5)
    neg = bessel_j_miller(6, -2.5)
    for k in range(7):
        assert neg[k] == pytest.approx((-1) ** k * pos[k], abs=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError):
        bessel_j(1, bad)


@settings(max_examples=200, deadline=None)
@given(st.integers(-40, 40), st.floats(-50, 50, allow_nan=False))
def test_parity_exact(k, x):
    assert bessel_j(-k, x) == (-1) ** (k % 2) * bessel_j(k, x)


@settings(max_examples=200, deadline=None)
@given(st.integers(-30, 30), st.floats(0.05, 50))
def test_recurrence(k, x):
    lhs = bessel_j(k - 1, x) + bessel_j(k + 1, x)
    assert abs(lhs - 2 * k / x * bessel_j(k, x)) < 1e-9 * max(1.0, abs(k / x))


def test_jacobi_anger_undriven():
    c = jacobi_anger_coeffs(0.0, 5)
    assert len(c) == 11
    assert c[5] == 1.0
    assert np.count_nonzero(c) == 1


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 40))
def test_completeness(u):
    c = jacobi_anger_coeffs(u, math.ceil(u) + 20)
    assert abs(np.sum(c * c) - 1.0) < 1e-10


def test_completeness_monotone_from_below():
    u = 7.3
    sums = [np.sum(jacobi_anger_coeffs(u, k) ** 2) for k in range(0, 30)]
    assert all(b >= a - 1e-15 for a, b in zip(sums, sums[1:]))
    assert sums[-1] <= 1 + 1e-14


def test_sideband_power_ratios_at_312():
    c = jacobi_anger_coeffs(3.12, 5)
    j2 = c[5:9] ** 2
    ratios = j2 / j2[0]
    for got, paper in zip(ratios, [1, 0.969, 2.660, 1.225]):
        assert got == pytest.approx(paper, rel=0.01)


def test_orders_and_default_kmax():
    assert list(jacobi_anger_orders(2)) == [-2, -1, 0, 1, 2]
    assert default_kmax(0.5) == 21 and default_kmax(3.12) == 24
    with pytest.raises(ValueError):
        jacobi_anger_coeffs(1.0, -1)


def test_jacobi_anger_identity():
    # exp(i u sin wt) = sum_k J_k(u) exp(i k wt)
    u, k_max = 2.7, 30
    c = jacobi_anger_coeffs(u, k_max)
    wt = np.linspace(0, 2 * np.pi, 17)
    series = np.sum(c[None, :] * np.exp(1j * np.outer(wt, np.arange(-k_max, k_max + 1))), axis=1)
    assert np.max(np.abs(series - np.exp(1j * u * np.sin(wt)))) < 1e-13
