"""Noise models: samplers against their analytic autocorrelation and spectrum."""

import numpy as np
import pytest
from scipy.integrate import quad

from zenosense import (
    HarmonicMixture,
    InvalidInputError,
    OrnsteinUhlenbeck,
    RandomTelegraph,
    derive_seed,
    sample_path,
    stream_rng,
)


def sample_matrix(model, duration, dt, n_paths, seed):
    return np.vstack([sample_path(model, duration, dt, i, seed).values for i in range(n_paths)])


class TestSamplerBasics:
    def test_grid_is_uniform_and_covers_duration(self):
        path = sample_path(OrnsteinUhlenbeck(1.0, 1.0), 1.05, 0.1, 0, 1)
        steps = np.diff(path.times)
        np.testing.assert_allclose(steps, 0.1, rtol=1e-12)
        assert path.times[0] == 0.0
        assert path.times[-1] >= 1.05

    @pytest.mark.parametrize("duration,dt", [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, 2.0)])
    def test_invalid_grid_arguments(self, duration, dt):
        with pytest.raises(InvalidInputError):
            sample_path(OrnsteinUhlenbeck(1.0, 1.0), duration, dt, 0, 1)

    def test_reproducible_bitwise(self):
        a = sample_path(OrnsteinUhlenbeck(1.3, 0.7), 5.0, 0.02, 3, 42)
        b = sample_path(OrnsteinUhlenbeck(1.3, 0.7), 5.0, 0.02, 3, 42)
        np.testing.assert_array_equal(a.values, b.values)

    def test_distinct_indices_give_distinct_paths(self):
        a = sample_path(OrnsteinUhlenbeck(1.0, 1.0), 2.0, 0.1, 0, 42)
        b = sample_path(OrnsteinUhlenbeck(1.0, 1.0), 2.0, 0.1, 1, 42)
        assert not np.array_equal(a.values, b.values)

    def test_stream_helpers_deterministic(self):
        assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
        assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
        x = stream_rng(7, 1, 2).standard_normal(4)
        y = stream_rng(7, 1, 2).standard_normal(4)
        np.testing.assert_array_equal(x, y)


class TestOrnsteinUhlenbeck:
    def test_zero_sigma_gives_zero_path(self):
        path = sample_path(OrnsteinUhlenbeck(0.0, 1.0), 3.0, 0.1, 0, 5)
        np.testing.assert_array_equal(path.values, np.zeros_like(path.values))

    def test_stationary_variance_monte_carlo(self):
        # Sample mean of E(t)^2 at a fixed t across 10^4 paths within
        # 3 standard errors of sigma^2 = 1 (Var[X^2] = 2 sigma^4).
        values = sample_matrix(OrnsteinUhlenbeck(1.0, 1.0), 2.0, 0.25, 10_000, 7)
        second_moment = np.mean(values[:, -1] ** 2)
        stderr = np.sqrt(2.0 / values.shape[0])
        assert abs(second_moment - 1.0) < 3.0 * stderr

    def test_autocorrelation_closed_form(self):
        model = OrnsteinUhlenbeck(1.0, 2.0)
        assert model.autocorrelation(0.0) == pytest.approx(1.0)
        assert model.autocorrelation(2.0) == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert model.autocorrelation(-2.0) == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_empirical_lag_correlation(self):
        model = OrnsteinUhlenbeck(1.0, 1.0)
        values = sample_matrix(model, 2.0, 0.5, 10_000, 21)
        products = values[:, 0] * values[:, 2]  # lag = 1.0
        stderr = np.std(products, ddof=1) / np.sqrt(products.size)
        assert abs(np.mean(products) - model.autocorrelation(1.0)) < 3.0 * stderr

    def test_marginal_fourth_moment_gaussian(self):
        values = sample_matrix(OrnsteinUhlenbeck(1.0, 1.0), 1.0, 0.5, 10_000, 31)
        fourth = np.mean(values[:, -1] ** 4)
        # Var[X^4] = 105 - 9 = 96 for a standard normal marginal.
        stderr = np.sqrt(96.0 / values.shape[0])
        assert abs(fourth - 3.0) < 3.0 * stderr

    def test_spectral_density_at_zero(self):
        assert OrnsteinUhlenbeck(1.0, 1.0).spectral_density(0.0) == pytest.approx(1.0 / np.pi, abs=1e-12)


class TestRandomTelegraph:
    def test_values_are_two_state(self):
        path = sample_path(RandomTelegraph(1.0, 2.0), 5.0, 0.05, 0, 9)
        assert set(np.unique(path.values)) <= {-1.0, 1.0}

    def test_autocorrelation_closed_form(self):
        model = RandomTelegraph(1.5, 0.5)
        assert model.autocorrelation(0.0) == pytest.approx(1.5**2)
        assert model.autocorrelation(2.0) == pytest.approx(1.5**2 * np.exp(-2.0), abs=1e-12)

    def test_empirical_lag_correlation(self):
        model = RandomTelegraph(1.0, 0.8)
        values = sample_matrix(model, 2.0, 0.5, 10_000, 13)
        products = values[:, 0] * values[:, 4]  # lag = 2.0
        stderr = np.std(products, ddof=1) / np.sqrt(products.size)
        assert abs(np.mean(products) - model.autocorrelation(2.0)) < 3.0 * stderr

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(InvalidInputError):
            RandomTelegraph(1.0, 0.0)


class TestHarmonicMixture:
    def test_marginal_variance(self):
        model = HarmonicMixture(((1.0, 2.0), (0.5, 5.0)))
        values = sample_matrix(model, 1.0, 0.5, 5_000, 17)
        expected = 0.5 * (1.0**2 + 0.5**2)
        sample_var = np.mean(values[:, -1] ** 2)
        stderr = np.std(values[:, -1] ** 2, ddof=1) / np.sqrt(values.shape[0])
        assert abs(sample_var - expected) < 3.0 * stderr

    def test_autocorrelation_closed_form(self):
        model = HarmonicMixture(((2.0, 3.0),))
        lag = 0.4
        assert model.autocorrelation(lag) == pytest.approx(2.0 * np.cos(3.0 * 0.4), abs=1e-12)

    def test_spectral_lines_and_zero_density(self):
        model = HarmonicMixture(((2.0, 3.0), (1.0, 6.0)))
        assert not model.smooth_spectrum
        assert model.spectral_lines() == [(3.0, 1.0), (6.0, 0.25)]
        assert model.spectral_density(3.0) == 0.0

    def test_rejects_zero_frequency(self):
        with pytest.raises(InvalidInputError):
            HarmonicMixture(((1.0, 0.0),))


class TestSpectralDensityConsistency:
    @pytest.mark.parametrize(
        "model",
        [OrnsteinUhlenbeck(1.0, 1.0), OrnsteinUhlenbeck(0.8, 2.5), RandomTelegraph(1.2, 0.7)],
        ids=["ou_unit", "ou_slow", "rtn"],
    )
    def test_quadrature_oracle(self, model):
        # S(omega) = (1/pi) Int_0^inf g(t) cos(omega t) dt for even g;
        # truncation at 20 correlation times is far below 1e-6.
        t_corr = 1.0 / (2.0 * model.rate) if isinstance(model, RandomTelegraph) else model.tau_c
        for omega in (0.0, 0.35, 1.0, 4.0):
            oracle, _ = quad(lambda t: model.autocorrelation(t) * np.cos(omega * t), 0.0, 20.0 * t_corr, limit=200)
            oracle /= np.pi
            assert model.spectral_density(omega) == pytest.approx(oracle, abs=1e-6)

    @pytest.mark.parametrize(
        "model",
        [OrnsteinUhlenbeck(1.0, 1.0), RandomTelegraph(1.2, 0.7), HarmonicMixture(((1.0, 2.0),))],
        ids=["ou", "rtn", "harmonic"],
    )
    def test_even_in_omega(self, model):
        omegas = np.array([0.1, 0.9, 3.7])
        np.testing.assert_array_equal(model.spectral_density(omegas), model.spectral_density(-omegas))

    @pytest.mark.parametrize(
        "model",
        [OrnsteinUhlenbeck(1.4, 0.6), RandomTelegraph(0.9, 1.3)],
        ids=["ou", "rtn"],
    )
    def test_wiener_khinchin(self, model):
        total, _ = quad(model.spectral_density, -np.inf, np.inf)
        assert abs(total - model.autocorrelation(0.0)) < 1e-8

    def test_tail_integral_closed_form(self):
        model = OrnsteinUhlenbeck(1.0, 1.0)
        numeric, _ = quad(model.spectral_density, 5.0, np.inf)
        assert model.spectral_tail_integral(5.0) == pytest.approx(numeric, rel=1e-10)

    @pytest.mark.parametrize(
        "model",
        [OrnsteinUhlenbeck(1.1, 0.8), RandomTelegraph(1.3, 0.6), HarmonicMixture(((1.0, 2.0), (0.7, 4.5)))],
        ids=["ou", "rtn", "harmonic"],
    )
    def test_second_antiderivative_differentiates_back(self, model):
        # Central second difference of the tabulated antiderivative must
        # reproduce g away from the |lag| kink.
        h = 1e-4
        for lag in (0.3, 1.1, 2.7):
            second = (
                model.autocorrelation_ii(lag + h)
                - 2.0 * model.autocorrelation_ii(lag)
                + model.autocorrelation_ii(lag - h)
            ) / h**2
            assert second == pytest.approx(model.autocorrelation(lag), rel=1e-5, abs=1e-7)
