"""Sampler tests: proposal geometry, invariance checks, summaries, DIC."""

import math

import numpy as np
import pytest
from scipy import stats

from softplusreg.families import ExponentialResponse, SoftplusResponse, make_family
from softplusreg.mcmc import (
    Chain,
    ChainSettings,
    dic,
    iwls_proposal,
    mh_iwls_step,
    run_chain,
    summarize,
)
from softplusreg.model import (
    CoefficientBlock,
    DataBlock,
    ModelSpec,
    PredictorSpec,
)
from softplusreg.softplus import SoftplusParams


def normal_model():
    return ModelSpec(
        make_family("normal_ls"),
        {"mu": PredictorSpec("mu", ()), "sigma": PredictorSpec("sigma", ())},
    )


def normal_data(n=400, mean=3.0, sd=2.0, seed=0):
    rng = np.random.default_rng(seed)
    return DataBlock(rng.normal(mean, sd, size=n), {})


def poisson_problem(n=500, seed=0, a=1.0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    rate = np.log1p(np.exp(1.0 + 0.8 * x))
    y = rng.poisson(rate, size=n).astype(float)
    model = ModelSpec(
        make_family("poisson", mu=SoftplusResponse(SoftplusParams(a))),
        {"mu": PredictorSpec("mu", ("x",))},
    )
    return model, DataBlock(y, {"x": x})


def blocks_for(model, values):
    return {
        name: CoefficientBlock(name, np.atleast_1d(np.asarray(v, dtype=float)))
        for name, v in values.items()
    }


class TestChainSettings:
    def test_stored_count(self):
        assert ChainSettings(20, 10, 5, 0).stored == 2
        assert ChainSettings(12000, 2000, 1, 0).stored == 10000

    def test_validation(self):
        with pytest.raises(ValueError):
            ChainSettings(10, 10)
        with pytest.raises(ValueError):
            ChainSettings(10, 2, thin=0)
        with pytest.raises(ValueError):
            ChainSettings(0, 0)


class TestProposal:
    def test_conjugate_normal_mean_block_targets_sample_mean(self):
        data = normal_data()
        model = normal_model()
        ybar = float(np.mean(data.y))
        for start in (-5.0, 0.0, 11.0):
            state = iwls_proposal(
                model, data, blocks_for(model, {"mu": start, "sigma": 0.5}), "mu"
            )
            assert state.kind == "iwls"
            assert state.mean[0] == pytest.approx(ybar, abs=1e-10)

    def test_log_q_matches_scipy_gaussian(self):
        data = normal_data(n=50, seed=3)
        model = normal_model()
        state = iwls_proposal(
            model, data, blocks_for(model, {"mu": 1.0, "sigma": 0.0}), "mu"
        )
        cov = np.linalg.inv(state.chol_precision @ state.chol_precision.T)
        ref = stats.multivariate_normal(mean=state.mean, cov=cov)
        for x in (np.array([0.0]), np.array([2.5]), np.array([-4.0])):
            assert state.log_q(x) == pytest.approx(ref.logpdf(x), rel=1e-12)

    def test_fallback_on_nonfinite_score(self):
        model = ModelSpec(
            make_family("poisson", mu=ExponentialResponse()),
            {"mu": PredictorSpec("mu", ())},
        )
        data = DataBlock(np.array([1.0, 2.0, 3.0]), {})
        with np.errstate(over="ignore"):
            state = iwls_proposal(model, data, blocks_for(model, {"mu": 1e4}), "mu")
        assert state.kind == "rw"
        np.testing.assert_array_equal(state.mean, [1e4])

    def test_exact_gaussian_conditional_always_accepts(self):
        data = normal_data(n=200, seed=5)
        model = normal_model()
        rng = np.random.default_rng(9)
        blocks = blocks_for(model, {"mu": -2.0, "sigma": 0.3})
        for _ in range(25):
            new_block, accepted = mh_iwls_step(model, data, blocks, "mu", rng)
            assert accepted
            blocks = {**blocks, "mu": new_block}


class TestRunChain:
    def test_same_seed_bitwise_identical(self):
        model, data = poisson_problem()
        s = ChainSettings(400, 100, 1, 42)
        a = run_chain(model, data, settings=s)
        b = run_chain(model, data, settings=s)
        np.testing.assert_array_equal(a.samples["mu"], b.samples["mu"])
        assert a.accepted == b.accepted

    def test_different_seed_differs(self):
        model, data = poisson_problem()
        a = run_chain(model, data, settings=ChainSettings(400, 100, 1, 1))
        b = run_chain(model, data, settings=ChainSettings(400, 100, 1, 2))
        assert not np.array_equal(a.samples["mu"], b.samples["mu"])

    def test_burnin_all_but_one(self):
        model, data = poisson_problem()
        chain = run_chain(model, data, settings=ChainSettings(50, 49, 1, 0))
        assert chain.n_samples == 1
        assert chain.samples["mu"].shape == (1, 2)

    def test_thinning_count(self):
        model, data = poisson_problem()
        chain = run_chain(model, data, settings=ChainSettings(220, 20, 7, 0))
        assert chain.n_samples == (220 - 20) // 7

    def test_healthy_acceptance_rates(self):
        model, data = poisson_problem(n=500)
        chain = run_chain(model, data, settings=ChainSettings(2000, 500, 1, 3))
        for rate in chain.acceptance_rates.values():
            assert 0.5 <= rate <= 1.0
        assert chain.rw_fallbacks == {"mu": 0}

    def test_posterior_location_and_spread(self):
        data = normal_data(n=400, mean=3.0, sd=2.0, seed=7)
        chain = run_chain(normal_model(), data, settings=ChainSettings(3000, 500, 1, 11))
        draws = chain.samples["mu"][:, 0]
        ybar = float(np.mean(data.y))
        sd_hat = float(np.std(data.y))
        assert abs(draws.mean() - ybar) < 4.0 * draws.std() / math.sqrt(draws.size)
        assert draws.std() == pytest.approx(sd_hat / math.sqrt(data.n), rel=0.15)

    def test_coefficients_property_is_posterior_mean(self):
        model, data = poisson_problem()
        chain = run_chain(model, data, settings=ChainSettings(300, 100, 1, 0))
        np.testing.assert_array_equal(
            chain.coefficients["mu"].beta, chain.samples["mu"].mean(axis=0)
        )


def manual_chain(samples_column, iterations=200, burnin=0, accepted=150):
    model = ModelSpec(
        make_family("poisson", mu=ExponentialResponse()),
        {"mu": PredictorSpec("mu", ())},
    )
    col = np.asarray(samples_column, dtype=float).reshape(-1, 1)
    settings = ChainSettings(iterations, burnin, 1, 0)
    return Chain(
        model,
        {"mu": col},
        {"mu": ("intercept",)},
        settings,
        {"mu": accepted},
        {"mu": 0},
    )


class TestSummarize:
    def test_known_quantiles_on_integer_ladder(self):
        chain = manual_chain(np.arange(1.0, 101.0), iterations=100)
        row = summarize(chain, level=0.95).row("mu", "intercept")
        assert row.mean == pytest.approx(50.5)
        assert row.lower == pytest.approx(3.475)
        assert row.upper == pytest.approx(97.525)
        assert row.exp_mean is None

    def test_constant_chain_degenerate_interval(self):
        chain = manual_chain(np.full(50, 1.3), iterations=50)
        row = summarize(chain, level=0.8, exp_mean=True).row("mu", "intercept")
        assert row.mean == 1.3
        assert row.lower == 1.3
        assert row.upper == 1.3
        assert row.exp_mean == pytest.approx(math.exp(1.3), rel=1e-15)

    def test_level_validation(self):
        chain = manual_chain(np.arange(10.0), iterations=10)
        with pytest.raises(ValueError):
            summarize(chain, level=1.0)
        with pytest.raises(ValueError):
            summarize(chain, level=0.0)

    def test_unknown_row_lookup(self):
        chain = manual_chain(np.arange(10.0), iterations=10)
        with pytest.raises(KeyError):
            summarize(chain).row("mu", "slope")

    def test_acceptance_rate_property(self):
        chain = manual_chain(np.arange(10.0), iterations=200, accepted=150)
        assert chain.acceptance_rates == {"mu": 0.75}


class TestDic:
    def test_identity_between_components(self):
        model, data = poisson_problem(n=200, seed=2)
        chain = run_chain(model, data, settings=ChainSettings(800, 300, 1, 0))
        r = dic(chain, model, data)
        assert r.dic == pytest.approx(r.deviance_mean + r.pd, rel=1e-15)
        assert r.pd == pytest.approx(r.deviance_mean - r.deviance_at_mean, rel=1e-15)

    def test_single_sample_has_zero_pd(self):
        model, data = poisson_problem(n=100, seed=4)
        chain = run_chain(model, data, settings=ChainSettings(30, 29, 1, 0))
        r = dic(chain, model, data)
        assert r.pd == 0.0
        assert r.dic == r.deviance_mean

    def test_pd_near_coefficient_count(self):
        model, data = poisson_problem(n=500, seed=6)
        chain = run_chain(model, data, settings=ChainSettings(4000, 1000, 1, 8))
        r = dic(chain, model, data)
        assert 1.0 < r.pd < 3.5

    def test_empty_chain_rejected(self):
        chain = manual_chain(np.empty(0), iterations=10, burnin=9)
        model, data = poisson_problem(n=50, seed=1)
        with pytest.raises(RuntimeError):
            dic(chain, chain.model, DataBlock(np.array([1.0, 2.0]), {}))
        with pytest.raises(RuntimeError):
            summarize(chain)
        with pytest.raises(RuntimeError):
            chain.posterior_mean_blocks()
