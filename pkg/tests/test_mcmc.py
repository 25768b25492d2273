"""Samplers: determinism, target recovery, relabeling, full conditionals."""

import math

import numpy as np
import pytest
from scipy import stats

from scoreprior.errors import (
    ConfigError,
    DomainError,
    InitializationError,
)
from scoreprior.mcmc import (
    Chain,
    McmcConfig,
    MixturePriors,
    _quantile_partition_init,
    chain_rng,
    data_rng,
    grand_mean_conditional,
    hierarchical_sampler,
    mwg_mixture,
    relabel_by_mean,
    relabel_by_weight,
    rw_metropolis,
    school_effect_conditional,
)
from scoreprior.models import (
    EightSchoolsData,
    MixtureModel,
    NormalScaleModel,
    loglik_mixture,
    sample_mixture,
)
from scoreprior.priors import ComparatorPrior, ScorePriorPositive


def std_normal_logpdf(x: float) -> float:
    return -0.5 * x * x


# ---------------------------------------------------------------------------
# config and chain containers
# ---------------------------------------------------------------------------

class TestMcmcConfig:
    def test_kept_count_formula(self):
        assert McmcConfig(n_iter=6000, burn_in=1000, thin=10).n_kept == 500
        assert McmcConfig(n_iter=105, burn_in=5, thin=10).n_kept == 10
        assert McmcConfig(n_iter=104, burn_in=5, thin=10).n_kept == 9

    def test_validation(self):
        with pytest.raises(ConfigError):
            McmcConfig(n_iter=0)
        with pytest.raises(ConfigError):
            McmcConfig(n_iter=10, burn_in=10)
        with pytest.raises(ConfigError):
            McmcConfig(thin=0)
        with pytest.raises(ConfigError):
            McmcConfig(seed=-1)
        with pytest.raises(ConfigError):
            McmcConfig(proposal_sd=0.0)
        with pytest.raises(ConfigError):
            McmcConfig(proposal_sd={"mu": -0.5})

    def test_scale_lookup(self):
        cfg = McmcConfig(proposal_sd={"mu": 0.2})
        assert cfg.scale_for("mu") == 0.2
        assert cfg.scale_for("sigma") == 0.5  # default for unnamed blocks
        assert McmcConfig(proposal_sd=1.5).scale_for("anything") == 1.5

    def test_chain_row_count_enforced(self):
        cfg = McmcConfig(n_iter=100, burn_in=0, thin=1)
        with pytest.raises(DomainError):
            Chain(draws=np.zeros((5, 1)), names=("x",), acceptance={},
                  config=cfg)

    def test_chain_rejects_bad_acceptance(self):
        cfg = McmcConfig(n_iter=5, burn_in=0, thin=1)
        with pytest.raises(DomainError):
            Chain(draws=np.zeros((5, 1)), names=("x",),
                  acceptance={"x": 1.5}, config=cfg)

    def test_column_lookup_error(self):
        cfg = McmcConfig(n_iter=5, burn_in=0, thin=1)
        ch = Chain(draws=np.zeros((5, 1)), names=("x",), acceptance={},
                   config=cfg)
        with pytest.raises(DomainError, match="no parameter named"):
            ch.column("y")

    def test_seed_streams_are_disjoint(self):
        a = data_rng(42).random(5)
        b = chain_rng(42).random(5)
        assert not np.allclose(a, b)
        np.testing.assert_array_equal(a, data_rng(42).random(5))


# ---------------------------------------------------------------------------
# scalar random walk
# ---------------------------------------------------------------------------

class TestRwMetropolis:
    def test_standard_normal_moments(self):
        cfg = McmcConfig(n_iter=110_000, burn_in=10_000, thin=1, seed=0)
        ch = rw_metropolis(std_normal_logpdf, 0.0, cfg)
        col = ch.column("theta")
        assert col.size == 100_000
        assert abs(col.mean()) < 0.02
        assert abs(col.std() - 1.0) < 0.03

    def test_bit_identical_repeats(self):
        cfg = McmcConfig(seed=123)
        a = rw_metropolis(std_normal_logpdf, 0.0, cfg)
        b = rw_metropolis(std_normal_logpdf, 0.0, cfg)
        np.testing.assert_array_equal(a.draws, b.draws)
        assert a.acceptance == b.acceptance

    def test_different_seeds_differ(self):
        a = rw_metropolis(std_normal_logpdf, 0.0, McmcConfig(seed=1))
        b = rw_metropolis(std_normal_logpdf, 0.0, McmcConfig(seed=2))
        assert not np.array_equal(a.draws, b.draws)

    def test_normal_scale_single_run(self):
        # n=100 draws at true scale 1; posterior mean should land nearby
        y = data_rng(5).standard_normal(100)
        model = NormalScaleModel(y)

        def log_post(s):
            return model.loglik(s) - 2.0 * math.log(1.0 + s)

        ch = rw_metropolis(log_post, model.mle(), McmcConfig(seed=5),
                           log_scale=True, name="sigma")
        assert abs(ch.column("sigma").mean() - 1.0) < 0.25

    def test_log_scale_needs_positive_init(self):
        with pytest.raises(InitializationError):
            rw_metropolis(std_normal_logpdf, -1.0, McmcConfig(),
                          log_scale=True)

    def test_infinite_start_rejected(self):
        def log_post(x):
            return -math.inf

        with pytest.raises(InitializationError):
            rw_metropolis(log_post, 0.0, McmcConfig())

    def test_adaptation_freezes_after_burn_in(self):
        # retained-phase acceptance sits near the adaptation target
        cfg = McmcConfig(n_iter=30_000, burn_in=5_000, thin=1, seed=9)
        ch = rw_metropolis(std_normal_logpdf, 0.0, cfg)
        assert 0.25 <= ch.acceptance["theta"] <= 0.45
        assert ch.acceptance_in()

    def test_kept_count_respects_schedule(self):
        cfg = McmcConfig(n_iter=1000, burn_in=100, thin=7, seed=0)
        ch = rw_metropolis(std_normal_logpdf, 0.0, cfg)
        assert ch.n_kept == (1000 - 100) // 7 == cfg.n_kept


# ---------------------------------------------------------------------------
# mixture sampler
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_mixture_chain():
    model = MixtureModel(weights=(0.5, 0.5), means=(-5.0, 5.0), sds=(1.0, 1.0))
    y = sample_mixture(model, 120, data_rng(3))
    cfg = McmcConfig(n_iter=4000, burn_in=1000, thin=5, seed=3)
    return y, mwg_mixture(y, 2, MixturePriors(), cfg)


class TestMwgMixture:
    def test_deterministic(self):
        y = sample_mixture(MixtureModel((1.0,), (0.0,), (1.0,)), 40,
                           data_rng(0))
        cfg = McmcConfig(n_iter=500, burn_in=100, thin=2, seed=11)
        a = mwg_mixture(y, 2, MixturePriors(), cfg)
        b = mwg_mixture(y, 2, MixturePriors(), cfg)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_config_errors(self):
        y = np.arange(10.0)
        with pytest.raises(ConfigError):
            mwg_mixture(y, 11, MixturePriors(), McmcConfig())
        with pytest.raises(ConfigError):
            mwg_mixture(y, 0, MixturePriors(), McmcConfig())
        with pytest.raises(ConfigError):
            mwg_mixture(np.array([]), 1, MixturePriors(), McmcConfig())

    def test_single_component_tracks_sample_mean(self):
        y = data_rng(21).normal(4.0, 1.0, 80)
        ch = mwg_mixture(y, 1, MixturePriors(),
                         McmcConfig(n_iter=6000, burn_in=1000, thin=5, seed=2))
        mu = ch.column("mu_1")
        assert abs(mu.mean() - y.mean()) < 2.0 * mu.std()

    def test_column_layout(self, small_mixture_chain):
        _, ch = small_mixture_chain
        assert ch.names == ("omega_1", "omega_2", "mu_1", "mu_2",
                            "sigma_1", "sigma_2")
        w = ch.draws[:, :2]
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(ch.draws[:, 4:] > 0)

    def test_separated_components_recovered(self, small_mixture_chain):
        y, ch = small_mixture_chain
        mus = np.sort(ch.draws[:, 2:4], axis=1).mean(axis=0)
        assert abs(mus[0] - (-5.0)) < 0.5
        assert abs(mus[1] - 5.0) < 0.5

    def test_acceptance_recorded_per_block(self, small_mixture_chain):
        _, ch = small_mixture_chain
        assert set(ch.acceptance) == {"mu_1", "mu_2", "sigma_1", "sigma_2"}
        assert all(0.0 <= v <= 1.0 for v in ch.acceptance.values())


class TestQuantilePartitionInit:
    def test_equal_count_blocks(self):
        # nine sorted values in three blocks of three
        y = np.array([9.0, 1.0, 2.0, 3.0, 10.0, 11.0, 20.0, 21.0, 22.0])
        _, mu, sd = _quantile_partition_init(y, 3)
        np.testing.assert_allclose(mu, [2.0, 10.0, 21.0])
        np.testing.assert_allclose(sd, np.array([1.0, 2.0, 3.0]).std()
                                   * np.ones(3))

    def test_balanced_clumps_found(self):
        rng = data_rng(1)
        # equal clump sizes line the blocks up with the clumps
        y = np.concatenate([rng.normal(-10, 1, 20), rng.normal(0, 0.8, 20),
                            rng.normal(7, 1.2, 20)])
        _, mu, sd = _quantile_partition_init(y, 3)
        np.testing.assert_allclose(mu, [-10, 0, 7], atol=0.7)
        assert np.all(sd > 0)

    def test_single_block_is_sample_stats(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        _, mu, sd = _quantile_partition_init(y, 1)
        assert mu[0] == pytest.approx(3.0)
        assert sd[0] == pytest.approx(y.std())

    def test_means_ascend(self):
        y = data_rng(2).normal(0, 5, 100)
        _, mu, _ = _quantile_partition_init(y, 4)
        assert np.all(np.diff(mu) >= 0)

    def test_duplicate_heavy_data(self):
        # ties collapse clusters; the floor keeps the sds positive
        y = np.array([1.0] * 30 + [2.0] * 3)
        _, mu, sd = _quantile_partition_init(y, 3)
        assert np.all(np.isfinite(mu))
        assert np.all(sd > 0)

    def test_deterministic(self):
        y = data_rng(3).normal(0, 1, 50)
        a = _quantile_partition_init(y, 3)
        b = _quantile_partition_init(y, 3)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)


# ---------------------------------------------------------------------------
# relabeling
# ---------------------------------------------------------------------------

def _toy_mixture_chain(rows):
    rows = np.asarray(rows, dtype=float)
    k = rows.shape[1] // 3
    cfg = McmcConfig(n_iter=rows.shape[0], burn_in=0, thin=1)
    names = tuple([f"omega_{l+1}" for l in range(k)]
                  + [f"mu_{l+1}" for l in range(k)]
                  + [f"sigma_{l+1}" for l in range(k)])
    return Chain(draws=rows, names=names, acceptance={}, config=cfg)


class TestRelabel:
    def test_weight_descending(self):
        ch = _toy_mixture_chain([[0.2, 0.8, 1.0, 2.0, 3.0, 4.0]])
        out = relabel_by_weight(ch)
        np.testing.assert_allclose(out.draws[0],
                                   [0.8, 0.2, 2.0, 1.0, 4.0, 3.0])

    def test_weight_tie_breaks_by_mean(self):
        ch = _toy_mixture_chain([[0.5, 0.5, 7.0, -1.0, 2.0, 3.0]])
        out = relabel_by_weight(ch)
        np.testing.assert_allclose(out.draws[0],
                                   [0.5, 0.5, -1.0, 7.0, 3.0, 2.0])

    def test_mean_ascending(self):
        ch = _toy_mixture_chain([[0.2, 0.8, 5.0, -5.0, 1.0, 2.0]])
        out = relabel_by_mean(ch)
        np.testing.assert_allclose(out.draws[0],
                                   [0.8, 0.2, -5.0, 5.0, 2.0, 1.0])

    def test_idempotent(self):
        rows = data_rng(4).random((6, 9))
        rows[:, :3] /= rows[:, :3].sum(axis=1, keepdims=True)
        ch = _toy_mixture_chain(rows)
        once = relabel_by_weight(ch)
        twice = relabel_by_weight(once)
        np.testing.assert_array_equal(once.draws, twice.draws)

    def test_density_preserved_draw_by_draw(self):
        rng = data_rng(8)
        rows = rng.random((20, 9))
        rows[:, :3] /= rows[:, :3].sum(axis=1, keepdims=True)
        rows[:, 3:6] = rng.normal(0, 3, (20, 3))
        ch = _toy_mixture_chain(rows)
        y = rng.normal(0, 2, 15)
        for relabel in (relabel_by_weight, relabel_by_mean):
            out = relabel(ch)
            for before, after in zip(ch.draws, out.draws):
                la = loglik_mixture(MixtureModel(before[:3], before[3:6],
                                                 before[6:]), y)
                lb = loglik_mixture(MixtureModel(after[:3], after[3:6],
                                                 after[6:]), y)
                assert la == pytest.approx(lb, abs=1e-9)

    def test_foreign_chain_rejected(self):
        ch = rw_metropolis(std_normal_logpdf, 0.0,
                           McmcConfig(n_iter=20, burn_in=0, thin=1))
        with pytest.raises(DomainError, match="not a mixture chain"):
            relabel_by_weight(ch)


# ---------------------------------------------------------------------------
# hierarchical sampler
# ---------------------------------------------------------------------------

class TestConditionals:
    def test_school_effect_closed_form(self):
        data = EightSchoolsData(y=np.array([10.0]), s=np.array([2.0]))
        mean, sd = school_effect_conditional(data, mu=4.0, sigma_alpha2=9.0)
        prec = 1 / 4 + 1 / 9
        np.testing.assert_allclose(mean, [(10.0 - 4.0) / 4 / prec])
        np.testing.assert_allclose(sd, [1 / math.sqrt(prec)])

    def test_grand_mean_closed_form(self):
        data = EightSchoolsData(y=np.array([2.0, 6.0]), s=np.array([1.0, 1.0]))
        mean, sd = grand_mean_conditional(data, np.array([0.0, 0.0]))
        assert mean == pytest.approx(4.0)
        assert sd == pytest.approx(1 / math.sqrt(2.0))

    def test_school_effect_sampling_matches_formula(self):
        data = EightSchoolsData()
        mean, sd = school_effect_conditional(data, mu=8.0, sigma_alpha2=4.0)
        rng = chain_rng(0)
        draws = mean + sd * rng.standard_normal((10_000, data.n_groups))
        se = sd / math.sqrt(10_000)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 3 * se)


class TestHierarchicalSampler:
    def test_deterministic(self):
        cfg = McmcConfig(n_iter=2000, burn_in=500, thin=5, seed=4)
        for prior in (ScorePriorPositive(1.0), ComparatorPrior("inverse_gamma")):
            a = hierarchical_sampler(EightSchoolsData(), prior, cfg)
            b = hierarchical_sampler(EightSchoolsData(), prior, cfg)
            np.testing.assert_array_equal(a.draws, b.draws)

    def test_layout_and_positivity(self):
        cfg = McmcConfig(n_iter=2000, burn_in=500, thin=5, seed=4)
        ch = hierarchical_sampler(EightSchoolsData(), ScorePriorPositive(), cfg)
        assert ch.names[0] == "mu"
        assert ch.names[-1] == "sigma_alpha2"
        assert len(ch.names) == 10
        assert np.all(ch.column("sigma_alpha2") > 0)

    def test_rejects_unsupported_priors(self):
        cfg = McmcConfig(seed=0)
        with pytest.raises(ConfigError):
            hierarchical_sampler(EightSchoolsData(), ComparatorPrior("flat"),
                                 cfg)
        with pytest.raises(ConfigError):
            hierarchical_sampler(EightSchoolsData(), "not a prior", cfg)

    def test_flat_likelihood_returns_prior(self):
        # with enormous standard errors the data say nothing, so the
        # marginal posterior of the variance is its prior
        data = EightSchoolsData(y=np.zeros(8), s=np.full(8, 1e8))
        prior = ScorePriorPositive(1.0)
        cfg = McmcConfig(n_iter=110_000, burn_in=10_000, thin=10, seed=13)
        ch = hierarchical_sampler(data, prior, cfg)
        draws = ch.column("sigma_alpha2")
        d, _ = stats.kstest(draws, prior.cdf)
        assert d < 0.1

    def test_ig_posterior_stable_across_seeds(self):
        # the conjugate variance updates should give seed-independent
        # quantiles up to Monte Carlo error
        data = EightSchoolsData()
        cfg = McmcConfig(n_iter=42_000, burn_in=2_000, thin=4, seed=6)
        a = hierarchical_sampler(data, ComparatorPrior("inverse_gamma"),
                                 cfg).column("sigma_alpha2")
        cfg2 = McmcConfig(n_iter=42_000, burn_in=2_000, thin=4, seed=7)
        b = hierarchical_sampler(data, ComparatorPrior("inverse_gamma"),
                                 cfg2).column("sigma_alpha2")
        for p in (0.25, 0.5, 0.75):
            qa, qb = np.quantile(a, p), np.quantile(b, p)
            assert abs(qa - qb) / qb < 0.2
