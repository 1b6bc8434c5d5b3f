"""Exponential integral tests against an extended-precision series oracle."""

import math

import mpmath as mp
import numpy as np
import pytest

from sdewave.expint import EULER_GAMMA, expint_ei


def ei_series_oracle(x: float, terms: int = 200, dps: int = 60) -> float:
    """Independent oracle: Ei(x) = gamma + ln|x| + sum x^n / (n n!).

    Evaluated at 60 decimal digits so cancellation on the negative axis is
    irrelevant; 200 terms is far past convergence for |x| <= 10.
    """
    with mp.workdps(dps):
        xm = mp.mpf(x)
        total = mp.euler + mp.log(abs(xm))
        term = mp.mpf(1)
        for n in range(1, terms + 1):
            term *= xm / n
            total += term / n
        return float(total)


class TestKnownValues:
    def test_ei_minus_one(self):
        expected = ei_series_oracle(-1.0)
        assert expected == pytest.approx(-0.21938393439552028, rel=1e-14)
        assert expint_ei(-1.0) == pytest.approx(expected, rel=1e-12)

    def test_bbed_constant_term(self):
        # constant appearing in the BBED variance with k = 2.6
        x = -2.0 * math.log(2.6)
        assert expint_ei(x) == pytest.approx(ei_series_oracle(x), rel=1e-12)

    def test_large_negative_asymptotic_bound(self):
        # |Ei(-50)| < e^-50 / 50
        value = expint_ei(-50.0)
        assert value < 0
        assert abs(value) < math.exp(-50.0) / 50.0
        assert abs(value) < 1e-23

    def test_positive_argument(self):
        with mp.workdps(40):
            expected = float(mp.ei(5.0))
        assert expint_ei(5.0) == pytest.approx(expected, rel=1e-12)

    def test_large_positive_asymptotic(self):
        with mp.workdps(60):
            expected = float(mp.ei(100.0))
        assert expint_ei(100.0) == pytest.approx(expected, rel=1e-10)

    def test_euler_gamma_constant(self):
        assert EULER_GAMMA == pytest.approx(float(mp.euler), abs=1e-19)


class TestAccuracy:
    def test_relative_accuracy_on_negative_axis(self):
        # the interval exercised by the BBED variance, plus margin
        xs = np.linspace(-10.0, -0.01, 200)
        for x in xs:
            expected = ei_series_oracle(float(x))
            assert expint_ei(float(x)) == pytest.approx(expected, rel=1e-10), x

    def test_against_scipy(self):
        from scipy.special import expi

        for x in np.concatenate([np.linspace(-40, -0.05, 57),
                                 np.linspace(0.05, 40, 57)]):
            assert expint_ei(float(x)) == pytest.approx(float(expi(x)),
                                                        rel=1e-10), x


class TestShape:
    def test_strictly_decreasing_on_negative_axis(self):
        # dEi/dx = e^x / x < 0 for x < 0, so Ei decreases toward Ei(0-) = -inf
        xs = np.linspace(-30.0, -0.01, 400)
        values = [expint_ei(float(x)) for x in xs]
        diffs = np.diff(values)
        assert np.all(diffs < 0)

    def test_strictly_increasing_on_positive_axis(self):
        xs = np.linspace(0.01, 30.0, 400)
        values = [expint_ei(float(x)) for x in xs]
        assert np.all(np.diff(values) > 0)

    def test_negative_for_negative_arguments(self):
        for x in (-0.01, -0.5, -1.0, -5.0, -20.0, -100.0):
            assert expint_ei(x) < 0

    @pytest.mark.parametrize("x", [-5.0, -1.0, -0.1])
    def test_derivative_matches_exp_over_x(self, x):
        h = 1e-5
        fd = (expint_ei(x + h) - expint_ei(x - h)) / (2 * h)
        assert fd == pytest.approx(math.exp(x) / x, rel=1e-6)


class TestDomain:
    def test_zero_raises(self):
        with pytest.raises(ValueError):
            expint_ei(0.0)

    @pytest.mark.parametrize("x", [701.0, -701.0, 1e4])
    def test_overflow_guard(self, x):
        with pytest.raises(OverflowError):
            expint_ei(x)

    def test_limits_just_inside_guard(self):
        assert np.isfinite(expint_ei(699.0))
        assert expint_ei(-699.0) == pytest.approx(0.0, abs=1e-300)
