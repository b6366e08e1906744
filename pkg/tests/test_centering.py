import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gptdensity.centering import default_mean, inverse_cdf_mean, kde_pdf, silverman_bandwidth
from gptdensity.estimation import l1_distance
from gptdensity.exceptions import DegenerateDataError, InvalidArgumentError
from gptdensity.model import TransferFunction, eval_model_density, marron_wand, midpoint_grid


class TestKde:
    def test_single_sample(self):
        assert kde_pdf([0.0], 1.0, 0.0) == pytest.approx(0.3989422804014327, abs=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(0.05, 3), st.floats(-12, 12))
    def test_reflection_symmetry(self, samples, h, y):
        s = np.asarray(samples)
        assert kde_pdf(s, h, y) == pytest.approx(kde_pdf(-s, h, -y), rel=1e-12, abs=1e-300)

    def test_normal_samples(self):
        s = np.random.default_rng(0).normal(size=10_000)
        assert abs(kde_pdf(s, silverman_bandwidth(s), 0.0) - 0.3989) < 0.03

    def test_integrates_to_one(self):
        s = np.random.default_rng(1).exponential(size=500)
        h = silverman_bandwidth(s)
        y = np.linspace(s.min() - 8 * h, s.max() + 8 * h, 8001)
        assert abs(np.trapezoid(kde_pdf(s, h, y), y) - 1) < 1e-3

    def test_errors(self):
        with pytest.raises(InvalidArgumentError):
            kde_pdf([], 1.0, 0.0)
        with pytest.raises(InvalidArgumentError):
            kde_pdf([1.0], 0.0, 0.0)
        with pytest.raises(DegenerateDataError):
            silverman_bandwidth([3.0, 3.0, 3.0])


class TestInverseCdfMean:
    def test_uniform(self):
        s = np.random.default_rng(2).uniform(size=20_000)
        grid = midpoint_grid(75)
        prior = inverse_cdf_mean(s, grid)
        assert np.abs(prior.mean_function(grid) - grid).max() < 0.05

    def test_normal_median(self):
        s = np.random.default_rng(3).normal(size=10_000)
        prior = inverse_cdf_mean(s, midpoint_grid(75))
        assert abs(prior.mean_function(0.5)) < 0.05
        assert prior.bandwidth == pytest.approx(silverman_bandwidth(s))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=40), st.integers(2, 60))
    def test_monotone(self, samples, G):
        if np.ptp(samples) < 1e-3:
            return
        prior = inverse_cdf_mean(samples, midpoint_grid(G), bandwidth=max(np.ptp(samples) / 10, 1e-3))
        assert np.all(np.diff(prior.mean_function.values) >= 0)
        assert np.all(np.isfinite(prior.mean_function.values))

    def test_shift_equivariance(self):
        s = np.random.default_rng(4).normal(size=2000)
        grid = midpoint_grid(75)
        a = inverse_cdf_mean(s, grid).mean_function(grid)
        b = inverse_cdf_mean(s + 3.7, grid).mean_function(grid)
        np.testing.assert_allclose(b - a, 3.7, atol=1e-3)

    def test_round_trip_mw6(self):
        f = marron_wand(6)
        s = f.rvs(10_000, np.random.default_rng(5))
        grid = midpoint_grid(75)
        prior = inverse_cdf_mean(s, grid)
        mu = TransferFunction(grid, prior.mean_function(grid))
        y = np.linspace(-5, 5, 4001)
        assert l1_distance(lambda v: eval_model_density(mu, 0.05, v), f.pdf, y) < 0.1

    def test_errors(self):
        with pytest.raises(DegenerateDataError):
            inverse_cdf_mean([1.0, 1.0], midpoint_grid(5))
        with pytest.raises(InvalidArgumentError):
            inverse_cdf_mean([1.0, 2.0], [0.0, 0.5])
        with pytest.raises(InvalidArgumentError):
            inverse_cdf_mean([1.0, 2.0], midpoint_grid(5), bandwidth=-1)


class TestDefaultMean:
    def test_values(self):
        m = default_mean()
        assert m(0.0) == 1.0
        assert m(1.0) == pytest.approx(2.22324, abs=1e-5)

    def test_continuous(self):
        m = default_mean()
        x = np.linspace(0, 1, 100_001)
        assert np.abs(np.diff(m(x))).max() < 1e-4
        assert not m.is_tabulated
