"""Acceptance battery. One criterion per test, one printed verdict line each.

The verdict lines print straight to the terminal (outside pytest's capture)
so a full `pytest -v` run shows the pass/fail ledger inline. Criteria 5, 6,
and 10 rerun the simulation studies at full replication counts and together
take roughly 20 to 30 minutes on a single core.

Criterion 6 fails by construction and is expected to stay red: it asserts a
strict increase in the DIC correct-selection rate between n=200 and n=5000
for exponential-generated data, but the rate saturates at 1.0 already at
n=200 on this design, so no strict increase exists. The assertion is kept
as stated rather than weakened; the non-strict form holds and is checked in
tests/test_experiments.py.
"""

import itertools
import math
import time

import numpy as np
from scipy import stats

from test_families import _fd_gradient, _random_problem

from softplusreg.cli import load_horseshoe_crabs
from softplusreg.experiments import (
    GpdTailSpec,
    ScenarioSpec,
    run_coverage_study,
    run_dic_selection_study,
    run_gpd_tail_study,
)
from softplusreg.families import (
    ExponentialResponse,
    IdentityResponse,
    LogisticResponse,
    SoftplusResponse,
    make_family,
    score_and_info,
)
from softplusreg.mcmc import ChainSettings, dic, run_chain, summarize
from softplusreg.mle import fit_mle
from softplusreg.model import (
    DataBlock,
    ModelSpec,
    PredictorSpec,
    build_design,
    linear_predictor,
)
from softplusreg.diagnostics import rqr
from softplusreg.softplus import (
    LinearityQuery,
    SoftplusParams,
    linear_threshold,
    rect_gap,
    softplus,
)


def _verdict(capfd, num, ok, detail):
    with capfd.disabled():
        print(f"\ncriterion {num:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def test_criterion_1_stability(capfd):
    t0 = time.perf_counter()
    p10 = SoftplusParams(10.0)
    delta = rect_gap(p10, 9.0)
    identity = softplus(p10, 9.0) == 9.0 + delta
    delta_ok = 0.0 < delta < 1e-39
    grid_ok = True
    grid = np.linspace(-1e6, 1e6, 200_001)
    for a in (0.1, 1.0, 10.0, 100.0):
        vals = softplus(SoftplusParams(a), grid)
        grid_ok = grid_ok and bool(np.all(np.isfinite(vals)))
        grid_ok = grid_ok and bool(np.all(np.diff(vals) >= 0.0))
    elapsed = time.perf_counter() - t0
    ok = identity and delta_ok and grid_ok and elapsed < 1.0
    _verdict(
        capfd, 1, ok,
        f"softplus(10,9)=9+delta with delta={delta:.3e}; "
        f"finite+monotone on [-1e6,1e6] x 4 sharpness values; {elapsed:.2f}s",
    )


def test_criterion_2_approximation_bound(capfd):
    t0 = time.perf_counter()
    x = np.arange(-50_000, 50_001) * 1e-3
    worst_dev = 0.0
    never_exceeds = True
    peak_at_zero = True
    for a in (0.1, 1.0, 5.0, 10.0, 100.0):
        gap = softplus(SoftplusParams(a), x) - np.maximum(0.0, x)
        bound = math.log(2.0) / a
        i = int(np.argmax(gap))
        peak_at_zero = peak_at_zero and x[i] == 0.0
        worst_dev = max(worst_dev, abs(gap[i] - bound))
        never_exceeds = never_exceeds and bool(np.all(gap <= bound))
    elapsed = time.perf_counter() - t0
    ok = peak_at_zero and worst_dev < 1e-12 and never_exceeds and elapsed < 1.0
    _verdict(
        capfd, 2, ok,
        f"max gap at x=0 equals log(2)/a (worst dev {worst_dev:.2e}), "
        f"never exceeded; {elapsed:.2f}s",
    )


def test_criterion_3_linearity_thresholds(capfd):
    t0 = time.perf_counter()
    t_pos = linear_threshold(LinearityQuery(5.0, 0.53, 0.05))
    t_neg = linear_threshold(LinearityQuery(5.0, -0.54, 0.05))
    elapsed = time.perf_counter() - t0
    ok = abs(t_pos - 0.37) <= 0.01 and abs(t_neg - 0.91) <= 0.01 and elapsed < 1.0
    _verdict(
        capfd, 3, ok,
        f"threshold(5, 0.53)={t_pos:.4f} (target 0.37+-0.01), "
        f"threshold(5, -0.54)={t_neg:.4f} (target 0.91+-0.01); {elapsed:.2f}s",
    )


def _response_options(support):
    if support == "positive":
        return (
            ExponentialResponse(),
            SoftplusResponse(SoftplusParams(1.0)),
            SoftplusResponse(SoftplusParams(5.0)),
        )
    if support == "real":
        return (IdentityResponse(),)
    return (LogisticResponse(),)


def test_criterion_4_gradient_suite(capfd):
    t0 = time.perf_counter()
    worst = 0.0
    combos = 0
    for family in ("poisson", "negbin", "za_negbin", "normal_ls", "gpd"):
        base = make_family(family)
        names = [p.name for p in base.parameters]
        options = [_response_options(p.support) for p in base.parameters]
        for chosen in itertools.product(*options):
            responses = dict(zip(names, chosen))
            combos += 1
            for seed in range(5):
                f, y, designs, betas = _random_problem(family, responses, seed, n=20)
                for target in names:
                    g, _ = score_and_info(f, y, designs, betas, target)
                    fd = _fd_gradient(f, y, designs, betas, target)
                    scale = max(1.0, float(np.max(np.abs(fd))))
                    worst = max(worst, float(np.max(np.abs(g - fd))) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 10.0
    _verdict(
        capfd, 4, ok,
        f"{combos} family/response combos x 5 seeds, worst relative "
        f"gradient error {worst:.2e}; {elapsed:.1f}s",
    )


def test_criterion_5_coverage_study(capfd):
    t0 = time.perf_counter()
    spec = ScenarioSpec(
        response=SoftplusResponse(SoftplusParams(1.0)),
        coefficients=(1.0, 0.5, 1.0, 2.0),
        n=1000,
        replications=200,
        chain=ChainSettings(6000, 1000, 1, 0),
        seed=0,
    )
    report = run_coverage_study(spec)
    cov95_ok = all(0.92 <= c <= 0.98 for c in report.coverage95)
    cov80_ok = all(0.74 <= c <= 0.86 for c in report.coverage80)
    bias_ok = all(abs(b) < 0.05 for b in report.bias)
    elapsed = time.perf_counter() - t0
    ok = cov95_ok and cov80_ok and bias_ok
    _verdict(
        capfd, 5, ok,
        f"cov95={tuple(round(float(c), 3) for c in report.coverage95)} in [0.92,0.98], "
        f"cov80={tuple(round(float(c), 3) for c in report.coverage80)} in [0.74,0.86], "
        f"max |bias|={max(abs(b) for b in report.bias):.4f} < 0.05, "
        f"divergent={report.divergent}; {elapsed / 60:.1f} min",
    )


def test_criterion_6_dic_selection(capfd):
    t0 = time.perf_counter()
    candidates = (ExponentialResponse(), SoftplusResponse(SoftplusParams(5.0)))
    rates = {}
    for n in (200, 5000):
        spec = ScenarioSpec(
            response=ExponentialResponse(),
            coefficients=(1.0, 0.5, 1.0, 2.0),
            n=n,
            replications=100,
            chain=ChainSettings(3000, 500, 1, 0),
            seed=0,
        )
        report = run_dic_selection_study(spec, candidates)
        rates[n] = report.rates[0]
    strict_increase = rates[5000] > rates[200]
    large_n_ok = rates[5000] > 0.8
    elapsed = time.perf_counter() - t0
    ok = strict_increase and large_n_ok
    _verdict(
        capfd, 6, ok,
        f"rate(n=200)={rates[200]:.2f}, rate(n=5000)={rates[5000]:.2f}; "
        f"strict increase {'holds' if strict_increase else 'impossible (saturated at 1.0)'}; "
        f"rate>0.8 at n=5000 {'holds' if large_n_ok else 'fails'}; {elapsed / 60:.1f} min",
    )


def test_criterion_7_crab_golden(capfd):
    t0 = time.perf_counter()
    crabs = load_horseshoe_crabs()
    results = {}
    for label, resp in (
        ("softplus5", SoftplusResponse(SoftplusParams(5.0))),
        ("exp", ExponentialResponse()),
    ):
        model = ModelSpec(
            make_family("negbin", mu=resp, sigma=ExponentialResponse()),
            {
                "mu": PredictorSpec("mu", ("width", "color")),
                "sigma": PredictorSpec("sigma", ()),
            },
        )
        chain = run_chain(model, crabs, settings=ChainSettings(12000, 2000, 1, 0))
        results[label] = (model, chain, dic(chain, model, crabs).dic)
    sp_model, sp_chain, sp_dic = results["softplus5"]
    exp_dic = results["exp"][2]
    summary = summarize(sp_chain)
    width = summary.row("mu", "width").mean
    color = summary.row("mu", "color").mean
    threshold = linear_threshold(LinearityQuery(5.0, 0.53, 0.05))
    X = build_design(crabs, sp_model.predictors["mu"])
    eta = linear_predictor(X, sp_chain.coefficients["mu"])
    share = float(np.mean(eta > threshold))
    elapsed = time.perf_counter() - t0
    ok = (
        sp_dic < exp_dic
        and abs(width - 0.53) <= 0.10
        and abs(color - (-0.54)) <= 0.20
        and share > 0.98
        and elapsed < 300.0
    )
    _verdict(
        capfd, 7, ok,
        f"DIC {sp_dic:.2f} < {exp_dic:.2f}; width={width:.3f} (0.53+-0.10); "
        f"color={color:.3f} (-0.54+-0.20); {share:.1%} of linear predictors "
        f"above {threshold:.3f} (>98%); {elapsed:.0f}s",
    )


def test_criterion_8_dic_identity(capfd):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.0, 1.0, size=100)
    y = rng.poisson(np.exp(0.5 + 0.8 * x), size=100).astype(float)
    model = ModelSpec(
        make_family("poisson", mu=ExponentialResponse()),
        {"mu": PredictorSpec("mu", ("x",))},
    )
    data = DataBlock(y, {"x": x})
    r = dic(run_chain(model, data, settings=ChainSettings(200, 50, 1, 0)), model, data)
    identity_ok = r.dic == 2.0 * r.deviance_mean - r.deviance_at_mean
    pd_ok = r.pd == r.deviance_mean - r.deviance_at_mean
    single = dic(run_chain(model, data, settings=ChainSettings(30, 29, 1, 0)), model, data)
    degenerate_ok = single.pd == 0.0 and single.dic == single.deviance_mean
    elapsed = time.perf_counter() - t0
    ok = identity_ok and pd_ok and degenerate_ok and elapsed < 1.0
    _verdict(
        capfd, 8, ok,
        f"DIC = 2*Dbar - D(mean) exactly; one-sample pD = {single.pd}; {elapsed:.2f}s",
    )


def test_criterion_9_rqr_calibration(capfd):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.0, 1.0, size=2000)
    y = rng.poisson(np.log1p(np.exp(1.0 + 0.8 * x)), size=2000).astype(float)
    pois_model = ModelSpec(
        make_family("poisson", mu=SoftplusResponse(SoftplusParams(1.0))),
        {"mu": PredictorSpec("mu", ("x",))},
    )
    pois_data = DataBlock(y, {"x": x})
    ks_pois = stats.kstest(
        rqr(fit_mle(pois_model, pois_data), pois_data, 42).residuals, "norm"
    ).statistic

    rng = np.random.default_rng(1)
    xn = rng.uniform(-1.0, 1.0, size=2000)
    yn = rng.normal(2.0 + xn, 1.5, size=2000)
    norm_model = ModelSpec(
        make_family("normal_ls"),
        {"mu": PredictorSpec("mu", ("x",)), "sigma": PredictorSpec("sigma", ())},
    )
    norm_data = DataBlock(yn, {"x": xn})
    ks_norm = stats.kstest(
        rqr(fit_mle(norm_model, norm_data), norm_data, 42).residuals, "norm"
    ).statistic
    elapsed = time.perf_counter() - t0
    ok = ks_pois < 0.05 and ks_norm < 0.05 and elapsed < 60.0
    _verdict(
        capfd, 9, ok,
        f"KS distance to standard normal: poisson {ks_pois:.4f}, "
        f"normal_ls {ks_norm:.4f} (both < 0.05); {elapsed:.1f}s",
    )


def test_criterion_10_gpd_tail_study(capfd):
    t0 = time.perf_counter()
    report = run_gpd_tail_study(GpdTailSpec())
    smaller_ok = report.softplus_max_smaller >= 0.70 * report.replications
    ratio_ok = report.median_ratio_top_decile < 1.0
    elapsed = time.perf_counter() - t0
    ok = smaller_ok and ratio_ok and elapsed < 1200.0
    _verdict(
        capfd, 10, ok,
        f"softplus max 99.9% quantile smaller in "
        f"{report.softplus_max_smaller}/{report.replications} replications (need >=14); "
        f"median top-decile width ratio {report.median_ratio_top_decile:.3f} < 1; "
        f"{elapsed / 60:.1f} min",
    )
