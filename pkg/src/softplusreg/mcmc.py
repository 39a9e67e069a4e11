"""Metropolis-Hastings sampling with Fisher-scoring (IWLS) proposals.

Each coefficient block is updated in turn from the Gaussian proposal
N(theta + F^{-1} g, F^{-1}) built at the current position, where g and F
are the gradient and information of the block's log posterior.  Because
the proposal moments depend on the position, the acceptance ratio keeps
both directional proposal densities.  Blocks whose information cannot be
factorized even after ridge repairs fall back to a spherical random walk;
those events are counted on the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .families import NumericalError, chol_with_ridge, score_and_info
from .mle import _total_loglik, fit_mle, init_coefficients
from .model import CoefficientBlock, DataBlock, ModelSpec, PriorSpec, build_designs, response_vector

__all__ = [
    "ChainSettings",
    "ProposalState",
    "Chain",
    "SummaryRow",
    "PosteriorSummary",
    "DicResult",
    "iwls_proposal",
    "mh_iwls_step",
    "run_chain",
    "summarize",
    "dic",
]

_RW_SD = 0.1
_MAX_PROPOSAL_REPAIRS = 3


@dataclass(frozen=True)
class ChainSettings:
    iterations: int = 12000
    burnin: int = 2000
    thin: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations <= 0 or self.burnin < 0 or self.iterations <= self.burnin:
            raise ValueError("need iterations > burnin >= 0")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def stored(self) -> int:
        return (self.iterations - self.burnin) // self.thin


@dataclass(frozen=True)
class ProposalState:
    """Gaussian block proposal at one position.

    chol_precision is the lower Cholesky factor L of the proposal's
    precision (L L' = F), so the covariance is F^{-1}.  kind records the
    mechanism: "iwls" for the Fisher-scoring proposal, "rw" for the
    random-walk fallback (identity precision scaled to sd 0.1).
    """

    theta: np.ndarray
    mean: np.ndarray
    chol_precision: np.ndarray
    kind: str
    g: np.ndarray | None = None
    F: np.ndarray | None = None
    repairs: int = 0

    def log_q(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - self.mean
        v = self.chol_precision.T @ d
        logdet_half = float(np.sum(np.log(np.diag(self.chol_precision))))
        return logdet_half - 0.5 * d.size * math.log(2.0 * math.pi) - 0.5 * float(v @ v)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.mean.size)
        return self.mean + sla.solve_triangular(self.chol_precision, z, lower=True, trans="T")


class _Engine:
    """Prebuilt designs and response for fast repeated block evaluations."""

    def __init__(self, model: ModelSpec, data: DataBlock):
        self.model = model
        self.family = model.family
        self.designs = build_designs(data, model)
        self.y = response_vector(model, data)

    def loglik(self, blocks) -> float:
        return _total_loglik(self.model, self.y, self.designs, blocks)

    def proposal(self, blocks, name: str) -> ProposalState:
        theta = blocks[name].beta
        prior = self.model.priors[name]
        try:
            g, F = score_and_info(self.family, self.y, self.designs, blocks, name, prior=prior)
            L, repairs = chol_with_ridge(F, max_repairs=_MAX_PROPOSAL_REPAIRS)
            mean = theta + sla.cho_solve((L, True), g)
            if np.all(np.isfinite(mean)):
                return ProposalState(theta, mean, L, "iwls", g, F, repairs)
        except (ValueError, NumericalError):
            pass
        return ProposalState(theta, theta.copy(), np.eye(theta.size) / _RW_SD, "rw")

    def step(self, blocks, name, ll_cur, fwd, rng):
        """One MH update; returns (blocks, ll, accepted, reverse-state)."""
        prior = self.model.priors[name]
        theta = blocks[name].beta
        theta_star = fwd.draw(rng)
        cand = {**blocks, name: CoefficientBlock(name, theta_star)}
        ll_star = self.loglik(cand)
        if not np.isfinite(ll_star):
            return blocks, ll_cur, False, None
        rev = self.proposal(cand, name)
        log_alpha = (
            ll_star
            + prior.log_density(theta_star)
            - ll_cur
            - prior.log_density(theta)
            + rev.log_q(theta)
            - fwd.log_q(theta_star)
        )
        if math.log(rng.random()) < log_alpha:
            return cand, ll_star, True, rev
        return blocks, ll_cur, False, None


def iwls_proposal(model: ModelSpec, data: DataBlock, blocks, name: str) -> ProposalState:
    """The Fisher-scoring proposal for one block at the given coefficients."""
    return _Engine(model, data).proposal(blocks, name)


def mh_iwls_step(model: ModelSpec, data: DataBlock, blocks, name: str, rng) -> tuple[CoefficientBlock, bool]:
    """Single MH update of one coefficient block (convenience wrapper)."""
    engine = _Engine(model, data)
    ll = engine.loglik(blocks)
    fwd = engine.proposal(blocks, name)
    new_blocks, _, accepted, _ = engine.step(blocks, name, ll, fwd, rng)
    return new_blocks[name], accepted


@dataclass
class Chain:
    model: ModelSpec
    samples: dict[str, np.ndarray]
    coefficient_names: dict[str, tuple[str, ...]]
    settings: ChainSettings
    accepted: dict[str, int]
    rw_fallbacks: dict[str, int]

    @property
    def n_samples(self) -> int:
        return next(iter(self.samples.values())).shape[0]

    @property
    def acceptance_rates(self) -> dict[str, float]:
        return {k: v / self.settings.iterations for k, v in self.accepted.items()}

    def posterior_mean_blocks(self) -> dict[str, CoefficientBlock]:
        if self.n_samples == 0:
            raise RuntimeError("chain holds no stored samples")
        return {k: CoefficientBlock(k, s.mean(axis=0)) for k, s in self.samples.items()}

    @property
    def coefficients(self) -> dict[str, CoefficientBlock]:
        return self.posterior_mean_blocks()


def _starting_blocks(model: ModelSpec, data: DataBlock) -> dict[str, CoefficientBlock]:
    """Warm start at the (possibly unconverged) MLE.

    A single Fisher-scoring step from a moment-based start can land far
    from the mode when n is large, and the reverse proposal density then
    rejects every move.  Running the scoring iteration to (near)
    convergence first keeps the proposals in their near-ideal regime;
    monotone ascent guarantees the result is never worse than the moment
    start, and fit_mle itself begins at init_coefficients.
    """
    try:
        result = fit_mle(model, data, max_iter=100)
    except NumericalError:
        return init_coefficients(model, data)
    betas = np.concatenate([b.beta for b in result.coefficients.values()])
    if not np.all(np.isfinite(betas)):
        return init_coefficients(model, data)
    return result.coefficients


def run_chain(
    model: ModelSpec,
    data: DataBlock,
    priors: dict[str, PriorSpec] | None = None,
    settings: ChainSettings = ChainSettings(),
) -> Chain:
    """Run one MCMC chain with cyclic block updates; reproducible by seed.

    Stored sample count is (iterations - burnin) // thin.  The proposal
    state of an untouched block is reused between iterations; any accepted
    move invalidates every block's cached state (their posteriors share the
    likelihood).
    """
    if priors is not None:
        model = ModelSpec(model.family, model.predictors, priors)
    engine = _Engine(model, data)
    rng = np.random.default_rng(settings.seed)
    blocks = _starting_blocks(model, data)
    ll = engine.loglik(blocks)
    if not np.isfinite(ll):
        raise NumericalError("log-likelihood not finite at the starting values")

    names = model.parameter_names
    stored = settings.stored
    samples = {n: np.empty((stored, blocks[n].beta.size)) for n in names}
    accepted = {n: 0 for n in names}
    rw_fallbacks = {n: 0 for n in names}

    version = 0
    cache: dict[str, tuple[int, ProposalState]] = {}
    for it in range(settings.iterations):
        for name in names:
            held = cache.get(name)
            if held is not None and held[0] == version:
                fwd = held[1]
            else:
                fwd = engine.proposal(blocks, name)
                cache[name] = (version, fwd)
            if fwd.kind == "rw":
                rw_fallbacks[name] += 1
            blocks, ll, ok, rev = engine.step(blocks, name, ll, fwd, rng)
            if ok:
                accepted[name] += 1
                version += 1
                cache[name] = (version, rev)
        j = it - settings.burnin
        if j >= 0 and j % settings.thin == settings.thin - 1:
            row = j // settings.thin
            for name in names:
                samples[name][row] = blocks[name].beta

    coef_names = {n: model.predictors[n].coefficient_names for n in names}
    return Chain(model, samples, coef_names, settings, accepted, rw_fallbacks)


@dataclass(frozen=True)
class SummaryRow:
    parameter: str
    coefficient: str
    mean: float
    lower: float
    upper: float
    exp_mean: float | None = None


@dataclass(frozen=True)
class PosteriorSummary:
    level: float
    rows: tuple[SummaryRow, ...]

    def row(self, parameter: str, coefficient: str) -> SummaryRow:
        for r in self.rows:
            if r.parameter == parameter and r.coefficient == coefficient:
                return r
        raise KeyError((parameter, coefficient))


def summarize(chain: Chain, level: float = 0.95, exp_mean: bool = False) -> PosteriorSummary:
    """Posterior means and equal-tailed credible intervals per coefficient.

    Quantiles use numpy's default linear interpolation.  With exp_mean the
    sample-wise mean of exp(beta) is reported alongside.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie strictly between 0 and 1")
    if chain.n_samples == 0:
        raise RuntimeError("chain holds no stored samples")
    lo_p, hi_p = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    rows = []
    for name in chain.model.parameter_names:
        draws = chain.samples[name]
        for j, coef in enumerate(chain.coefficient_names[name]):
            col = draws[:, j]
            rows.append(
                SummaryRow(
                    name,
                    coef,
                    float(col.mean()),
                    float(np.quantile(col, lo_p)),
                    float(np.quantile(col, hi_p)),
                    float(np.mean(np.exp(col))) if exp_mean else None,
                )
            )
    return PosteriorSummary(level, tuple(rows))


@dataclass(frozen=True)
class DicResult:
    deviance_mean: float
    deviance_at_mean: float
    pd: float
    dic: float


def dic(chain: Chain, model: ModelSpec, data: DataBlock) -> DicResult:
    """Deviance information criterion from the stored samples.

    D(theta) = -2 log-likelihood; pd = mean deviance minus deviance at the
    per-coefficient posterior mean; dic = 2 * mean deviance - deviance at
    the mean, computed in exactly that form.
    """
    if chain.n_samples == 0:
        raise RuntimeError("chain holds no stored samples")
    engine = _Engine(model, data)
    names = model.parameter_names
    devs = np.empty(chain.n_samples)
    for s in range(chain.n_samples):
        blocks = {n: CoefficientBlock(n, chain.samples[n][s]) for n in names}
        devs[s] = -2.0 * engine.loglik(blocks)
    dbar = float(np.mean(devs))
    dhat = -2.0 * engine.loglik(chain.posterior_mean_blocks())
    return DicResult(dbar, dhat, dbar - dhat, 2.0 * dbar - dhat)
