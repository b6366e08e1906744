import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from _oracles import (getting_it_right, getting_it_right_ks, lengthscale_target,
                      precision_form_posterior, scalar_normal_posterior, se_gram)
from gptdensity.exceptions import InvalidArgumentError
from gptdensity.gp import GpHyper, MeanFunction
from gptdensity.model import Dataset, marron_wand, midpoint_grid, standardize
from gptdensity.sampler import (SWEEP_ORDER, ModelConfig, Trace, init_chain,
                                kernel_precision_posterior, latent_log_weights,
                                latent_probabilities, lengthscale_log_ratio, occupied_function_law,
                                predict_heldout, residual_precision_posterior, run_chain,
                                step1_residual_precisions, step2_latents, step3_function_at_rows,
                                step4_function_at_grid, step5_kernel_precisions, step6_lengthscales,
                                unoccupied_function_law)


def make_state(y, G=10, x=None, mu=None, tau=1.0, phi=1.0, c=1.0, z=None, **cfg_kw):
    cfg = ModelConfig(G=G, iters=2, burn_in=0, **cfg_kw)
    state = init_chain(Dataset(np.asarray(y, float), z), cfg)
    if x is not None:
        state.x = np.asarray(x, dtype=np.intp)
    for ch in state.channels:
        ch.tau, ch.phi, ch.c = tau, phi, c
        if mu is not None:
            ch.mu = np.asarray(mu, float).copy()
    return cfg, state


class TestConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert (cfg.G, cfg.iters, cfg.burn_in, cfg.thin) == (75, 10_000, 1_000, 1)
        assert cfg.a_sigma == cfg.b_sigma == cfg.a_phi == cfg.b_phi == 1.0
        assert cfg.n_retained == 9_000

    @pytest.mark.parametrize("kw", [dict(G=0), dict(burn_in=10, iters=10), dict(a_sigma=0.0),
                                    dict(b_c=-1.0), dict(rw_scale=-0.1), dict(thin=0),
                                    dict(nugget=np.nan)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgumentError):
            ModelConfig(**kw)

    def test_elicited_preset(self):
        cfg = ModelConfig.elicited_preset(G=30)
        assert (cfg.a_sigma, cfg.b_sigma, cfg.c_start, cfg.G) == (25.0, 1.0, 25.0, 30)

    def test_echo_names_mean_functions(self):
        echo = ModelConfig(mean_y=MeanFunction.constant(1.0)).echo()
        assert "constant" in echo["mean_y"] and "sin" in echo["mean_z"]

    def test_sweep_order(self):
        assert SWEEP_ORDER == ("step1", "step2", "step3", "step5", "step6", "step4")


class TestInit:
    def test_single_row(self):
        cfg = ModelConfig(G=9, iters=2, burn_in=0)
        state = init_chain(Dataset([3.0]), cfg)
        assert state.grid[state.x[0]] == pytest.approx(0.5)

    def test_sorted_monotone(self):
        cfg = ModelConfig(G=20, iters=2, burn_in=0)
        state = init_chain(Dataset(np.sort(np.random.default_rng(0).normal(size=30))), cfg)
        assert np.all(np.diff(state.x) >= 0)

    def test_start_values(self):
        cfg = ModelConfig(G=10, iters=2, burn_in=0, a_sigma=4.0, b_sigma=2.0, c_start=7.0)
        state = init_chain(Dataset([0.1, 0.5, -1.0]), cfg)
        ch = state.channels[0]
        assert (ch.tau, ch.phi, ch.c) == (2.0, 1.0, 7.0)
        np.testing.assert_allclose(ch.mu, 2 * np.sin(state.grid) + np.cos(state.grid))

    def test_prediction_rows_use_predictor_ranks(self):
        cfg = ModelConfig(G=50, iters=2, burn_in=0)
        z = np.array([0.0, 1.0, 2.0, 3.0, -5.0, 10.0])
        state = init_chain(Dataset([1.0, 2.0, 3.0, 4.0], z), cfg)
        # ranks among all six z values: -5 is lowest, 10 highest
        assert state.grid[state.x[4]] == pytest.approx(1 / 7, abs=0.01)
        assert state.grid[state.x[5]] == pytest.approx(6 / 7, abs=0.01)
        assert len(state.channels) == 2 and state.channels[1].rows.size == 6


class TestStep1:
    def test_zero_residuals(self):
        y = [0.1, -0.4, 0.9, 1.5]
        cfg, state = make_state(y, G=20)
        ch = state.channels[0]
        ch.mu[state.x] = ch.obs
        assert residual_precision_posterior(ch, state.row_values(0)) == (3.0, 1.0)

    def test_sum_of_squares_two(self):
        y = [0.1, -0.4, 0.9, 1.5]
        cfg, state = make_state(y, G=20)
        ch = state.channels[0]
        ch.mu[state.x] = ch.obs + np.array([1.0, -1.0, 0.0, 0.0])
        shape, rate = residual_precision_posterior(ch, state.row_values(0))
        assert shape == 3.0 and rate == pytest.approx(2.0, abs=1e-12)

    def test_predictor_channel_uses_all_rows(self):
        cfg, state = make_state([0.0, 1.0], G=20, z=[0.0, 1.0, 2.0, 3.0], aa_sigma=2.0, bb_sigma=3.0)
        zch = state.channels[1]
        zch.mu[state.x] = zch.obs
        assert residual_precision_posterior(zch, state.row_values(1)) == (4.0, 3.0)

    def test_monte_carlo_mean(self):
        cfg, state = make_state([0.1, -0.4, 0.9, 1.5], G=20)
        ch = state.channels[0]
        shape, rate = residual_precision_posterior(ch, state.row_values(0))
        rng = np.random.default_rng(0)
        draws = np.array([step1_residual_precisions(state, rng=rng).channels[0].tau
                          for _ in range(100_000)])
        assert draws.mean() == pytest.approx(shape / rate, rel=0.01)


class TestStep2:
    def test_single_grid_point(self):
        cfg, state = make_state([0.3, -2.0, 4.0], G=1)
        step2_latents(state, rng=np.random.default_rng(0))
        np.testing.assert_array_equal(state.x, [0, 0, 0])

    def test_symmetric_pair(self):
        cfg, state = make_state([0.0], G=2, mu=[-1.3, 1.3], tau=2.0)
        p = latent_probabilities(state)
        assert abs(p[0, 0] - 0.5) < 1e-12 and abs(p[0, 1] - 0.5) < 1e-12

    def test_hand_case(self):
        y, mu, sigma = 0.4, np.array([-0.2, 1.1]), 0.8
        cfg, state = make_state([y], G=2, mu=mu, tau=1 / sigma**2)
        lik = stats.norm.pdf(y, mu, sigma)
        np.testing.assert_allclose(latent_probabilities(state)[0], lik / lik.sum(), rtol=0, atol=1e-10)

    def test_prediction_rows_ignore_response(self):
        cfg, state = make_state([0.0, 1.0], G=5, z=[0.5, -0.5, 2.0], mu=np.linspace(-1, 1, 5))
        logw = latent_log_weights(state)
        zch = state.channels[1]
        expected = stats.norm.logpdf(2.0, zch.mu, 1.0)
        np.testing.assert_allclose(logw[2], expected, atol=1e-12)
        yrow = stats.norm.logpdf(0.0, state.channels[0].mu, 1.0) + stats.norm.logpdf(0.5, zch.mu, 1.0)
        np.testing.assert_allclose(logw[0], yrow, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.integers(1, 30),
           st.floats(1e-3, 1e4), st.integers(0, 1000))
    def test_normalized(self, y, G, tau, seed):
        mu = np.random.default_rng(seed).normal(scale=3, size=G)
        cfg, state = make_state(y, G=G, mu=mu, tau=tau)
        p = latent_probabilities(state)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_draws_follow_weights(self):
        cfg, state = make_state([0.4], G=3, mu=[-0.5, 0.2, 1.0], tau=1.0)
        p = latent_probabilities(state)[0]
        rng = np.random.default_rng(1)
        counts = np.bincount([step2_latents(state, rng=rng).x[0] for _ in range(30_000)], minlength=3)
        np.testing.assert_allclose(counts / counts.sum(), p, atol=0.01)


class TestStep3:
    def test_scalar_oracle(self):
        y, m_val, phi, tau, nug = 1.7, 0.4, 2.5, 3.0, 1e-6
        cfg, state = make_state([y], G=4, x=[2], tau=tau, phi=phi, nugget=nug,
                                mean_y=MeanFunction.constant(m_val))
        idx, law = occupied_function_law(state, 0)
        mean, var = scalar_normal_posterior(y, m_val, (1 + nug) / phi, 1 / tau)
        assert list(idx) == [2]
        assert abs(law.mean[0] - mean) < 1e-10 and abs(law.cov[0, 0] - var) < 1e-10

    def test_two_point_oracle(self):
        y = np.array([0.3, -1.2, 0.5])
        x = [1, 6, 1]
        phi, tau, c, nug = 1.7, 2.2, 3.0, 1e-6
        cfg, state = make_state(y, G=8, x=x, tau=tau, phi=phi, c=c, nugget=nug)
        idx, law = occupied_function_law(state, 0)
        pts = state.grid[idx]
        K = se_gram(pts, phi, c, nug / phi)
        ybar = np.array([(0.3 + 0.5) / 2, -1.2])
        D = np.diag([1 / (2 * tau), 1 / tau])
        m = 2 * np.sin(pts) + np.cos(pts)
        mean, cov = precision_form_posterior(ybar, m, K, D)
        np.testing.assert_allclose(law.mean, mean, rtol=0, atol=1e-10)
        np.testing.assert_allclose(law.cov, cov, rtol=0, atol=1e-10)

    def test_vague_noise_gives_prior(self):
        cfg, state = make_state([5.0, -5.0], G=6, x=[1, 4], tau=1e-12, phi=2.0, c=2.0)
        idx, law = occupied_function_law(state, 0)
        pts = state.grid[idx]
        np.testing.assert_allclose(law.mean, 2 * np.sin(pts) + np.cos(pts), atol=1e-6)
        np.testing.assert_allclose(law.cov, se_gram(pts, 2.0, 2.0, 1e-6 / 2.0), atol=1e-6)

    def test_duplicated_position(self):
        cfg, state = make_state([0.2, 0.9], G=6, x=[3, 3])
        step3_function_at_rows(state, rng=np.random.default_rng(0))
        vals = state.row_values(0)
        assert np.all(np.isfinite(vals))
        assert abs(vals[0] - vals[1]) <= 10 * np.sqrt(cfg.nugget)


class TestStep4:
    def test_hand_case(self):
        phi, c, nug = 2.0, 5.0, 1e-6
        cfg, state = make_state([0.7], G=2, x=[0], phi=phi, c=c, nugget=nug,
                                mean_y=MeanFunction.constant(0.1))
        state.channels[0].mu[0] = 0.9
        free, law = unoccupied_function_law(state, 0)
        g = state.grid
        k12 = np.exp(-c * (g[1] - g[0]) ** 2) / phi
        k11 = 1 / phi + nug / phi
        assert list(free) == [1]
        assert law.mean[0] == pytest.approx(0.1 + k12 / k11 * 0.8, abs=1e-10)
        assert law.cov[0, 0] == pytest.approx(k11 - k12**2 / k11, abs=1e-10)

    def test_occupied_values_untouched(self):
        cfg, state = make_state([0.7, -0.2], G=10, x=[2, 7])
        before = state.channels[0].mu[[2, 7]].copy()
        step4_function_at_grid(state, rng=np.random.default_rng(0))
        np.testing.assert_array_equal(state.channels[0].mu[[2, 7]], before)

    def test_prior_reversion(self):
        cfg, state = make_state([0.7], G=10, x=[0], phi=4.0, c=1e5)
        state.channels[0].mu[0] = 9.0
        free, law = unoccupied_function_law(state, 0)
        g = state.grid[free]
        np.testing.assert_allclose(law.mean, 2 * np.sin(g) + np.cos(g), atol=1e-8)
        np.testing.assert_allclose(np.diag(law.cov), 0.25 + 1e-6 / 4, atol=1e-8)

    def test_all_occupied(self):
        cfg, state = make_state([0.1, 0.2], G=2, x=[0, 1])
        free, law = unoccupied_function_law(state, 0)
        assert free.size == 0 and law is None


class TestStep5:
    def test_zero_quadratic_form(self):
        cfg, state = make_state([0.1, 0.2, 0.3], G=10, x=[1, 4, 4], a_phi=2.0, b_phi=3.0)
        ch = state.channels[0]
        ch.mu = ch.mean_grid.copy()
        shape, rate = kernel_precision_posterior(state, 0)
        # two occupied grid points
        assert shape == 3.0 and rate == pytest.approx(3.0, abs=1e-12)

    def test_scalar_oracle(self):
        d, nug = 0.8, 1e-6
        cfg, state = make_state([0.1], G=5, x=[2], nugget=nug)
        ch = state.channels[0]
        ch.mu[2] = ch.mean_grid[2] + d
        shape, rate = kernel_precision_posterior(state, 0)
        assert shape == 1.5
        assert abs(rate - (1 + d * d / (2 * (1 + nug)))) < 1e-10

    def test_two_point_oracle(self):
        cfg, state = make_state([0.1, 0.2], G=6, x=[0, 3], c=4.0)
        ch = state.channels[0]
        ch.mu[[0, 3]] += [0.5, -0.3]
        R = se_gram(state.grid[[0, 3]], 1.0, 4.0, cfg.nugget)
        dev = np.array([0.5, -0.3])
        shape, rate = kernel_precision_posterior(state, 0)
        assert shape == 2.0
        assert abs(rate - (1 + 0.5 * dev @ np.linalg.solve(R, dev))) < 1e-10

    def test_monte_carlo_mean(self):
        cfg, state = make_state([0.1], G=5, x=[2])
        state.channels[0].mu[2] += 1.0
        shape, rate = kernel_precision_posterior(state, 0)
        rng = np.random.default_rng(3)
        draws = np.array([step5_kernel_precisions(state, rng=rng).channels[0].phi
                          for _ in range(100_000)])
        assert draws.mean() == pytest.approx(shape / rate, rel=0.01)


class TestStep6:
    def test_zero_step_always_accepts(self):
        cfg, state = make_state([0.1, 0.5, -0.3], G=8, x=[1, 4, 6], rw_scale=0.0)
        before = state.channels[0].c
        rng = np.random.default_rng(0)
        for _ in range(50):
            step6_lengthscales(state, cfg, rng)
        ch = state.channels[0]
        assert ch.c == before and ch.accepted == ch.proposed == 50

    def test_ratio_oracle(self):
        cfg, state = make_state([0.1, 0.5], G=8, x=[1, 5], phi=1.3, c=2.0, a_c=2.0, b_c=0.5)
        ch = state.channels[0]
        ch.mu[[1, 5]] = ch.mean_grid[[1, 5]] + [0.4, -0.7]
        pts = state.grid[[1, 5]]
        args = (ch.mu[[1, 5]], ch.mean_grid[[1, 5]], pts, 1.3)
        oracle = (lengthscale_target(*args, 7.5, 2.0, 0.5, cfg.nugget)
                  - lengthscale_target(*args, 2.0, 2.0, 0.5, cfg.nugget))
        assert abs(lengthscale_log_ratio(state, 0, 7.5, cfg) - oracle) < 1e-10

    def test_prior_recovery(self):
        cfg, state = make_state([0.1], G=4, x=[1], c=1.0, a_c=1.0, b_c=1.0, rw_scale=1.0)
        rng = np.random.default_rng(4)
        cs = np.empty(100_000)
        for t in range(cs.size):
            cs[t] = step6_lengthscales(state, cfg, rng).channels[0].c
        assert cs.mean() == pytest.approx(1.0, rel=0.05)


class TestRunChain:
    def test_one_retained(self, normal_data):
        tr = run_chain(normal_data, ModelConfig(G=10, iters=6, burn_in=5))
        assert len(tr) == 1 and isinstance(tr, Trace)

    def test_thinning(self, normal_data):
        tr = run_chain(normal_data, ModelConfig(G=10, iters=20, burn_in=4, thin=5))
        assert len(tr) == len(range(4, 20, 5))

    def test_deterministic(self, normal_data, small_cfg):
        a = run_chain(normal_data, small_cfg)
        b = run_chain(normal_data, small_cfg)
        for name in ("x", "mu", "sigma", "phi", "c"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_grid_confinement_and_manifest(self, normal_data, small_cfg):
        tr = run_chain(normal_data, small_cfg)
        assert tr.x.min() >= 0 and tr.x.max() < small_cfg.G
        assert np.issubdtype(tr.x.dtype, np.integer)
        m = tr.manifest
        assert set(m["step_seconds"]) == set(SWEEP_ORDER)
        assert 0 <= m["lengthscale_acceptance"][0] <= 1
        assert m["seed"] == small_cfg.seed and m["n_retained"] == len(tr)

    def test_regression_channels(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=30)
        data = standardize(Dataset(z[:20] + 0.1 * rng.normal(size=20), z[:, None]))
        tr = run_chain(data, ModelConfig(G=15, iters=100, burn_in=10))
        assert tr.n_channels == 2 and tr.N == 30 and tr.n == 20
        assert tr.mu.shape == (90, 2, 15)

    def test_log_joint_burn_in(self):
        data = standardize(Dataset(marron_wand(6).rvs(100, np.random.default_rng(7))))
        cfg = ModelConfig(G=40, iters=1500, burn_in=0, seed=1)
        tr = run_chain(data, cfg, track_log_joint=True)
        k = len(tr) // 10
        assert tr.log_joint[-k:].mean() >= tr.log_joint[:k].mean()

    def test_trace_indexing(self, normal_data, small_cfg):
        tr = run_chain(normal_data, small_cfg)
        sub = tr[np.array([0, 5, 7])]
        assert isinstance(sub, Trace) and len(sub) == 3
        np.testing.assert_array_equal(sub.mu[1], tr.mu[5])
        assert tr[2].mu.shape == tr.mu[2].shape
        assert len(tr[:10].concat(tr[10:])) == len(tr)


class TestPredictHeldout:
    def _trace(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=25)
        data = standardize(Dataset(z[:20] + 0.3 * rng.normal(size=20), z[:, None]))
        return run_chain(data, ModelConfig(G=15, iters=400, burn_in=100, seed=2))

    def test_collapse_when_sigma_small(self):
        tr = self._trace()
        tr.sigma[:, 0] = 1e-12
        draws = predict_heldout(tr, 22, rng=np.random.default_rng(0))
        centers = tr.mu[np.arange(len(tr)), 0, tr.x[:, 22]]
        np.testing.assert_allclose(draws, centers, atol=1e-10)

    def test_mean(self):
        tr = self._trace()
        rng = np.random.default_rng(1)
        draws = np.concatenate([predict_heldout(tr, 21, rng=rng) for _ in range(50)])
        centers = tr.mu[np.arange(len(tr)), 0, tr.x[:, 21]]
        se = np.sqrt(np.mean(tr.sigma[:, 0] ** 2) / draws.size)
        assert abs(draws.mean() - centers.mean()) < 5 * se

    def test_deterministic_and_range(self):
        tr = self._trace()
        a = predict_heldout(tr, 24, rng=np.random.default_rng(3))
        b = predict_heldout(tr, 24, rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)
        with pytest.raises(InvalidArgumentError):
            predict_heldout(tr, 5)
        with pytest.raises(InvalidArgumentError):
            predict_heldout(tr, 25)


def test_getting_it_right_with_predictor():
    cfg, draws = getting_it_right(n=4, G=8, sweeps=10_000, seed=1, n_predict=2,
                                  a_sigma=2.0, b_sigma=0.5, aa_phi=3.0, bb_phi=2.0)
    for channel in (0, 1):
        ks = getting_it_right_ks(cfg, draws, channel)
        assert max(ks.values()) < 0.05, (channel, ks)
