"""Metropolis building blocks, conjugate updates, sampler plumbing, diagnostics."""

import math

import numpy as np
import pytest

from arealbeta.config import ModelConfig, SamplerSettings
from arealbeta.errors import ConfigError, SamplingError
from arealbeta.mcmc import (
    PosteriorDraws,
    adapt_scale,
    chain_seeds,
    diagnostics,
    effective_sample_size,
    gibbs_tau_alpha,
    gibbs_tau_psi,
    parameter_columns,
    run_sampler,
    rw_step,
    sample_mh,
    split_rhat,
)
from arealbeta.spatial import graph_from_edges

SETTINGS = SamplerSettings(iterations=100, burn_in=50, thinning=1)


class TestRwStep:
    def test_zero_scale_always_accepts(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            new, accepted = rw_step(1.3, lambda x: -0.5 * x * x, 0.0, rng)
            assert accepted and new == 1.3

    def test_huge_scale_low_acceptance(self):
        rng = np.random.default_rng(1)
        hits = sum(rw_step(0.0, lambda x: -0.5 * x * x, 50.0, rng)[1] for _ in range(10_000))
        assert hits / 10_000 < SETTINGS.target_acceptance

    def test_symmetric_target_mean(self):
        rng = np.random.default_rng(2)
        x, total, n = 0.0, 0.0, 200_000
        for _ in range(n):
            x, _ = rw_step(x, lambda v: -0.5 * v * v, 2.4, rng)
            total += x
        # N(0,1) target; autocorrelated chain, so use a generous SE bound
        assert abs(total / n) < 0.05

    def test_nonfinite_start_rejected(self):
        with pytest.raises(SamplingError):
            rw_step(0.0, lambda x: -math.inf, 1.0, np.random.default_rng(0))


class TestAdaptScale:
    def test_all_accept_increases(self):
        assert adapt_scale([True] * 50, 1.0, SETTINGS) > 1.0

    def test_all_reject_decreases(self):
        assert adapt_scale([False] * 50, 1.0, SETTINGS) < 1.0

    def test_fixed_point_at_target(self):
        history = [True] * 44 + [False] * 56  # exactly the 0.44 target
        assert adapt_scale(history, 1.0, SETTINGS) == pytest.approx(1.0, abs=1e-12)

    def test_clamped(self):
        assert adapt_scale([True] * 50, 9e3, SETTINGS, batch_index=1) <= 1e4
        assert adapt_scale([False] * 50, 2e-8, SETTINGS, batch_index=1) >= 1e-8


class TestGibbsTau:
    def test_tau_psi_italy_shape(self, italy):
        # psi = 0: shape 0.5 + (20 - 2)/2 + 1/2 = 10, rate 0.0005
        rng = np.random.default_rng(3)
        draws = np.array(
            [gibbs_tau_psi(np.zeros(20), italy, (0.5, 0.0005), rng) for _ in range(50_000)]
        )
        mean = 10.0 / 0.0005
        sd = math.sqrt(10.0) / 0.0005
        assert abs(draws.mean() - mean) < 4 * sd / math.sqrt(draws.size)

    def test_two_isolated_nodes_rate_term(self):
        g = graph_from_edges([], ["a", "b"])
        t = 0.8
        rng = np.random.default_rng(4)
        draws = np.array(
            [gibbs_tau_psi(np.array([t, -t]), g, (0.5, 0.0005), rng) for _ in range(50_000)]
        )
        shape, rate = 0.5 + 1.0, 0.0005 + t * t
        assert abs(draws.mean() - shape / rate) < 4 * math.sqrt(shape) / rate / math.sqrt(
            draws.size
        )

    def test_tau_alpha_zero_vector(self):
        rng = np.random.default_rng(5)
        draws = np.array(
            [gibbs_tau_alpha(np.zeros(13), 0.5, (0.5, 0.0005), rng) for _ in range(50_000)]
        )
        shape, rate = 0.5 + 6.5, 0.0005
        assert abs(draws.mean() - shape / rate) < 4 * math.sqrt(shape) / rate / math.sqrt(
            draws.size
        )

    def test_tau_alpha_rho_zero_rate(self):
        rng = np.random.default_rng(6)
        alpha = rng.normal(size=6)
        # with rho = 0 the conditional rate is rate0 + sum(alpha^2)/2; check
        # via the analytic mean over many draws
        draws = np.array(
            [gibbs_tau_alpha(alpha, 0.0, (0.5, 0.0005), rng) for _ in range(50_000)]
        )
        shape = 0.5 + 3.0
        rate = 0.0005 + 0.5 * float(np.sum(alpha**2))
        assert abs(draws.mean() - shape / rate) < 4 * math.sqrt(shape) / rate / math.sqrt(
            draws.size
        )


class TestChainSeeds:
    def test_disjoint_and_deterministic(self):
        a = chain_seeds(42, 4)
        b = chain_seeds(42, 4)
        assert a == b
        assert len(set(a)) == 4
        assert chain_seeds(43, 4) != a


class TestRunSampler:
    def test_shapes_and_columns(self, small_panel, small_fit):
        graph, panel, _ = small_panel
        config, draws = small_fit
        assert draws.values.shape == (2, 100, len(draws.columns))
        assert draws.columns == parameter_columns(config, panel, graph)
        assert draws.metadata["kept_per_chain"] == 100
        assert draws.metadata["kept_pooled"] == 200

    def test_same_seed_identical(self, small_panel, tiny_settings):
        graph, panel, _ = small_panel
        config = ModelConfig(sampler=tiny_settings)
        a = run_sampler(config, panel, graph)
        b = run_sampler(config, panel, graph)
        np.testing.assert_array_equal(a.values, b.values)

    def test_different_seed_differs(self, small_panel, small_fit):
        graph, panel, _ = small_panel
        config = ModelConfig(
            sampler=SamplerSettings(iterations=600, burn_in=300, thinning=3, chains=2, seed=18)
        )
        other = run_sampler(config, panel, graph)
        assert not np.array_equal(other.values, small_fit[1].values)

    def test_psi_draws_sum_to_zero(self, small_fit):
        _, draws = small_fit
        psi = np.stack([draws.per_chain(c) for c in draws.group("psi")])
        np.testing.assert_allclose(psi.sum(axis=0), 0.0, atol=1e-10)

    def test_omega_draws_binary(self, small_fit):
        _, draws = small_fit
        for col in draws.group("omega"):
            assert np.isin(draws.pooled(col), (0.0, 1.0)).all()

    def test_phi_matches_ab_squared_support(self, small_fit):
        _, draws = small_fit
        phi = draws.pooled("phi")
        assert np.all(phi > 0.0) and np.all(phi < 2500.0)

    def test_rho_in_unit_interval_under_m1(self, small_fit):
        _, draws = small_fit
        rho = draws.pooled("rho")
        assert np.all((rho > 0.0) & (rho < 1.0))

    def test_mismatched_graph_rejected(self, small_panel):
        _, panel, _ = small_panel
        wrong = graph_from_edges([("a", "b")], ["a", "b"])
        with pytest.raises(ConfigError, match="do not match"):
            run_sampler(ModelConfig(), panel, wrong)

    def test_random_gender_variant_runs(self, small_panel, tiny_settings):
        graph, panel, _ = small_panel
        config = ModelConfig(variant="M4", sampler=tiny_settings)
        draws = run_sampler(config, panel, graph)
        assert draws.group("gamma") == ["gamma[1]", "gamma[2]"]
        assert "mu_s[1]" in draws.columns
        s2 = np.concatenate([draws.pooled("sigma2_s[1]"), draws.pooled("sigma2_s[2]")])
        assert np.all((s2 >= 1.0) & (s2 <= 10.0))
        # M4 places a Normal prior on rho; nothing forces (0,1)
        assert math.isfinite(draws.pooled("rho").mean())


class TestDrawsIo:
    def test_csv_round_trip(self, small_fit, tmp_path):
        _, draws = small_fit
        draws.write_csv(tmp_path / "draws.csv")
        draws.write_metadata(tmp_path / "metadata.json")
        back = PosteriorDraws.read_csv(tmp_path / "draws.csv", tmp_path / "metadata.json")
        np.testing.assert_array_equal(back.values, draws.values)
        assert back.columns == draws.columns
        assert back.metadata["config_digest"] == draws.metadata["config_digest"]

    def test_write_is_byte_stable(self, small_fit, tmp_path):
        _, draws = small_fit
        draws.write_csv(tmp_path / "a.csv")
        draws.write_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_rejects_non_draws_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        meta = tmp_path / "m.json"
        meta.write_text("{}")
        with pytest.raises(ConfigError, match="not a draws file"):
            PosteriorDraws.read_csv(bad, meta)


class TestDiagnostics:
    def test_rhat_iid_chains_near_one(self):
        rng = np.random.default_rng(7)
        chains = rng.normal(size=(2, 20_000))
        assert 0.99 <= split_rhat(chains) <= 1.01

    def test_rhat_flags_trend(self):
        rng = np.random.default_rng(8)
        stationary = rng.normal(size=2_000)
        trend = np.linspace(-3, 3, 2_000) + rng.normal(size=2_000) * 0.1
        assert split_rhat(np.stack([stationary, trend])) > 1.1

    def test_ess_iid_within_ten_percent(self):
        rng = np.random.default_rng(9)
        chains = rng.normal(size=(2, 10_000))
        ess = effective_sample_size(chains)
        assert abs(ess - 20_000) / 20_000 < 0.10

    def test_ess_low_for_sticky_chain(self):
        rng = np.random.default_rng(10)
        n = 10_000
        x = np.empty(n)
        x[0] = 0.0
        noise = rng.normal(size=n)
        for t in range(1, n):
            x[t] = 0.95 * x[t - 1] + noise[t]
        assert effective_sample_size(x[None, :]) < 0.2 * n

    def test_diagnostics_table(self, small_fit):
        _, draws = small_fit
        table = diagnostics(draws)
        assert set(table) == set(draws.columns)
        rhat, ess = table["beta0"]
        assert math.isfinite(rhat) and ess > 0


class TestSampleMh:
    def test_recovers_gaussian_target(self):
        rng = np.random.default_rng(11)
        cov_inv = np.array([[2.0, -0.5], [-0.5, 1.0]])

        def log_target(x):
            return float(-0.5 * x @ cov_inv @ x)

        draws = sample_mh(log_target, np.zeros(2), 30_000, 5_000, rng)
        cov = np.cov(draws.T)
        np.testing.assert_allclose(cov, np.linalg.inv(cov_inv), atol=0.08)
