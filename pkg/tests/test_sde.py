"""Tests for the OUVE/BBED definitions and closed-form kernel moments."""

import math

import numpy as np
import pytest

from sdewave.sde import (
    SdeKind,
    SdeSpec,
    SingularityError,
    complex_standard_normal,
    diffusion,
    drift,
    kernel_moments,
    mean_coefficients,
    prior_mismatch,
    sample_perturbation,
    variance,
)


@pytest.fixture
def grids():
    rng = np.random.default_rng(42)
    x0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    return x0, y


class TestSpecValidation:
    def test_defaults(self):
        ouve = SdeSpec.ouve()
        assert (ouve.gamma, ouve.k, ouve.T, ouve.c) == (1.5, 10.0, 1.0, 0.18)
        bbed = SdeSpec.bbed()
        assert (bbed.k, bbed.T, bbed.c) == (2.6, 0.999, 0.08)

    @pytest.mark.parametrize("bad", [
        dict(c=0.0), dict(c=-1.0), dict(k=0.0), dict(T=0.0),
    ])
    def test_positivity(self, bad):
        with pytest.raises(ValueError):
            SdeSpec.ouve(**bad)

    def test_bbed_needs_t_below_one(self):
        with pytest.raises(ValueError):
            SdeSpec.bbed(T=1.0)
        with pytest.raises(ValueError):
            SdeSpec.bbed(T=1.5)

    def test_ouve_needs_gamma(self):
        with pytest.raises(ValueError):
            SdeSpec(SdeKind.OUVE, c=0.1, k=10.0, T=1.0, gamma=None)

    def test_ouve_gamma_log_k_denominator(self):
        # gamma + ln k = 0 makes the variance denominator vanish
        gamma = 1.5
        with pytest.raises(ValueError):
            SdeSpec.ouve(k=math.exp(-gamma), gamma=gamma)

    def test_config_round_trip(self):
        for spec in (SdeSpec.ouve(c=0.07), SdeSpec.bbed(c=0.51)):
            assert SdeSpec.from_config_text(spec.to_config_text()) == spec

    def test_config_rejects_unknown_keys(self):
        text = SdeSpec.bbed().to_config_text() + "bogus = 1\n"
        with pytest.raises(ValueError):
            SdeSpec.from_config_text(text)

    def test_config_requires_kind(self):
        with pytest.raises(ValueError):
            SdeSpec.from_config_text("c = 0.1\nk = 2.6\nT = 0.9\n")


class TestDrift:
    def test_ouve_vanishes_at_mixture(self, grids):
        x0, _ = grids
        out = drift(SdeSpec.ouve(), x0, x0, 0.3)
        assert np.allclose(out, 0.0)

    def test_bbed_scalar_value(self):
        out = drift(SdeSpec.bbed(), np.array([0.0 + 0j]), np.array([1.0 + 0j]), 0.5)
        assert out[0] == pytest.approx(2.0)

    def test_ouve_stiffness_value(self):
        out = drift(SdeSpec.ouve(), np.array([0.0 + 0j]), np.array([1.0 + 0j]), 0.0)
        assert out[0] == pytest.approx(1.5)

    def test_bbed_singularity_guard(self, grids):
        x0, y = grids
        with pytest.raises(SingularityError):
            drift(SdeSpec.bbed(), x0, y, 1.0 - 1e-7)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            drift(SdeSpec.ouve(), np.zeros(3, complex), np.zeros(4, complex), 0.1)


class TestDiffusion:
    def test_sqrt_c_at_zero(self):
        assert diffusion(SdeSpec.ouve(c=0.18, k=10.0), 0.0) == \
            pytest.approx(0.4242640687119285, rel=1e-12)

    def test_bbed_at_one(self):
        # sqrt(0.08) * 2.6, frozen from a high-precision evaluation
        assert diffusion(SdeSpec.bbed(c=0.08, k=2.6, T=0.999), 1.0) == \
            pytest.approx(0.7353910524340095, rel=1e-12)

    def test_constant_when_k_is_one(self):
        spec = SdeSpec.ouve(c=1.0, k=1.0)
        for t in (0.0, 0.3, 0.9, 2.0):
            assert diffusion(spec, t) == pytest.approx(1.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            diffusion(SdeSpec.ouve(), -0.1)


class TestKernelMoments:
    def test_initial_condition(self, grids):
        x0, y = grids
        for spec in (SdeSpec.ouve(), SdeSpec.bbed()):
            km = kernel_moments(spec, x0, y, 0.0)
            assert np.array_equal(km.mean, x0)
            assert km.std == 0.0

    def test_bbed_midpoint_mean(self, grids):
        x0, y = grids
        km = kernel_moments(SdeSpec.bbed(), x0, y, 0.5)
        assert np.allclose(km.mean, 0.5 * x0 + 0.5 * y, rtol=1e-14)

    def test_ouve_mean_coefficients(self):
        a, b = mean_coefficients(SdeSpec.ouve(), 0.4)
        assert a == pytest.approx(math.exp(-0.6), rel=1e-14)
        assert a + b == pytest.approx(1.0)

    def test_time_domain_checked(self, grids):
        x0, y = grids
        with pytest.raises(ValueError):
            kernel_moments(SdeSpec.bbed(), x0, y, 0.9995)
        with pytest.raises(ValueError):
            kernel_moments(SdeSpec.ouve(), x0, y, -0.1)


class TestVarianceShape:
    def test_zero_at_origin_exactly(self):
        assert variance(SdeSpec.ouve(), 0.0) == 0.0
        assert variance(SdeSpec.bbed(), 0.0) == 0.0

    def test_ouve_strictly_increasing(self):
        spec = SdeSpec.ouve()
        ts = np.linspace(0.0, spec.T, 1000)
        values = np.array([variance(spec, float(t)) for t in ts])
        assert np.all(np.diff(values) > 0)

    def test_bbed_vanishes_toward_one(self):
        spec = SdeSpec.bbed()
        assert variance(spec, 0.9999) < variance(spec, 0.5)
        assert variance(spec, 1.0 - 1e-9) < 1e-6

    def test_bbed_interior_maximum(self):
        spec = SdeSpec.bbed()
        ts = np.linspace(1e-4, 0.9989, 999)
        values = np.array([variance(spec, float(t)) for t in ts])
        peak = int(np.argmax(values))
        assert 0 < peak < len(ts) - 1
        # non-monotone: rises to the peak, then drops below the peak by T
        assert values[peak] > values[0]
        assert values[peak] > variance(spec, spec.T)

    def test_bbed_k_one_limit_is_brownian_bridge(self):
        spec = SdeSpec(SdeKind.BBED, c=0.4, k=1.0, T=0.99)
        for t in (0.1, 0.5, 0.9):
            assert variance(spec, t) == pytest.approx(0.4 * t * (1 - t), rel=1e-12)

    @pytest.mark.parametrize("make,t", [
        (SdeSpec.ouve, 0.3), (SdeSpec.ouve, 0.9),
        (SdeSpec.bbed, 0.3), (SdeSpec.bbed, 0.9),
    ])
    def test_variance_proportional_to_c(self, make, t):
        lo = make(c=0.07)
        hi = make(c=0.14)
        ratio = variance(hi, t) / variance(lo, t)
        assert ratio == pytest.approx(2.0, abs=1e-12)
        std_ratio = math.sqrt(variance(hi, t)) / math.sqrt(variance(lo, t))
        assert std_ratio == pytest.approx(math.sqrt(2.0), abs=1e-12)


class TestSamplePerturbation:
    def test_t_zero_returns_clean_exactly(self, grids):
        x0, y = grids
        rng = np.random.default_rng(0)
        out = sample_perturbation(SdeSpec.bbed(), x0, y, 0.0, rng)
        assert np.array_equal(out, x0)

    def test_seeded_reproducibility(self, grids):
        x0, y = grids
        a = sample_perturbation(SdeSpec.ouve(), x0, y, 0.5,
                                np.random.default_rng(123))
        b = sample_perturbation(SdeSpec.ouve(), x0, y, 0.5,
                                np.random.default_rng(123))
        assert np.array_equal(a, b)

    def test_empirical_variance_matches_sigma(self):
        spec = SdeSpec.ouve()
        x0 = np.array([0.3 + 0.1j])
        y = np.array([-0.2 + 0.4j])
        t = 0.6
        rng = np.random.default_rng(7)
        n = 100_000
        draws = np.array([
            sample_perturbation(spec, x0, y, t, rng)[0]
            for _ in range(200)])
        # vectorized equivalent for the bulk of the sample
        km = kernel_moments(spec, x0, y, t)
        z = complex_standard_normal(rng, n)
        draws = np.concatenate([draws, km.mean[0] + km.std * z])
        var = np.mean(np.abs(draws - draws.mean()) ** 2)
        sigma2 = km.std ** 2
        # var estimator SE for complex Gaussians is sigma^2 / sqrt(n)
        assert abs(var - sigma2) <= 3 * sigma2 / math.sqrt(len(draws))

    def test_unit_complex_normal_convention(self):
        z = complex_standard_normal(np.random.default_rng(5), 200_000)
        assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, rel=0.01)
        assert np.var(z.real) == pytest.approx(0.5, rel=0.02)


class TestPriorMismatch:
    def test_bbed_linear_in_remaining_time(self, grids):
        x0, y = grids
        norm = np.linalg.norm(x0 - y)
        value = prior_mismatch(SdeSpec.bbed(T=0.999), x0, y)
        assert value == pytest.approx(0.001 * norm, rel=1e-12)

    def test_ouve_exponential(self, grids):
        x0, y = grids
        norm = np.linalg.norm(x0 - y)
        value = prior_mismatch(SdeSpec.ouve(T=1.0), x0, y)
        assert value == pytest.approx(math.exp(-1.5) * norm, rel=1e-12)
        assert math.exp(-1.5) == pytest.approx(0.22313016014842982, rel=1e-14)

    def test_zero_when_clean_equals_mixture(self, grids):
        x0, _ = grids
        assert prior_mismatch(SdeSpec.bbed(), x0, x0) == 0.0
        assert prior_mismatch(SdeSpec.ouve(), x0, x0) == 0.0

    def test_bbed_below_ouve(self, grids):
        x0, y = grids
        assert prior_mismatch(SdeSpec.bbed(T=0.999), x0, y) < \
            prior_mismatch(SdeSpec.ouve(T=1.0), x0, y)

    def test_early_start_increases_mismatch(self, grids):
        x0, y = grids
        spec = SdeSpec.bbed()
        assert prior_mismatch(spec, x0, y, t=0.19) > \
            prior_mismatch(spec, x0, y, t=spec.T)


class TestGridValidation:
    def test_non_finite_rejected(self):
        bad = np.array([1.0 + 0j, np.nan + 0j])
        with pytest.raises(ValueError):
            drift(SdeSpec.ouve(), bad, np.zeros(2, complex), 0.1)
