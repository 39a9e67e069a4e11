"""Residual and interval diagnostics.

Randomized quantile residuals map observations through the fitted CDF onto
the standard-normal scale (uniformly randomized within the CDF jump for
count data), so a correctly specified model yields standard-normal
residuals.  The Anderson-Darling statistic summarizes tail misfit of those
residuals; ci_width_ratio compares posterior quantile-interval widths
between two fitted chains observation by observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as sps

from .model import CoefficientBlock, DataBlock, build_design, linear_predictor, response_vector
from .families import cdf, quantile

__all__ = [
    "RqrSet",
    "AdStatistic",
    "CiWidthRatios",
    "rqr",
    "ad_statistic",
    "qq_export",
    "ci_width_ratio",
]

_CLIP = 1e-12


@dataclass(frozen=True)
class RqrSet:
    """Residuals on the standard-normal scale plus the seed that made them."""

    residuals: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.residuals.size


@dataclass(frozen=True)
class AdStatistic:
    a2: float
    n: int


def _plugin_params(fit, data: DataBlock) -> dict[str, np.ndarray]:
    model = fit.model
    out = {}
    for pdef in model.family.parameters:
        X = build_design(data, model.predictors[pdef.name])
        out[pdef.name] = pdef.response.value(linear_predictor(X, fit.coefficients[pdef.name]))
    return out


def rqr(fit, data: DataBlock, rng) -> RqrSet:
    """Randomized quantile residuals at the fit's plug-in parameters.

    Continuous families use Phi^{-1}(F(y)); discrete ones draw uniformly
    from (F(y-1), F(y)].  Probabilities are clipped to [1e-12, 1 - 1e-12]
    before the normal quantile, so residuals stay finite.
    """
    model = fit.model
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(seed) if seed is not None else rng
    params = _plugin_params(fit, data)
    y = response_vector(model, data)
    hi = cdf(model.family, y, params)
    if model.family.discrete:
        lo = cdf(model.family, y - 1.0, params)
        v = 1.0 - gen.random(y.size)  # uniform on (0, 1]
        u = lo + v * (hi - lo)
    else:
        u = hi
    u = np.clip(u, _CLIP, 1.0 - _CLIP)
    return RqrSet(sps.ndtri(u), seed)


def ad_statistic(r: RqrSet) -> AdStatistic:
    """Anderson-Darling A^2 of the residuals against the standard normal."""
    z = np.sort(np.asarray(r.residuals, dtype=float))
    n = z.size
    if n < 2:
        raise ValueError("the Anderson-Darling statistic needs at least 2 residuals")
    i = np.arange(1, n + 1)
    terms = (2.0 * i - 1.0) * (sps.log_ndtr(z) + sps.log_ndtr(-z[::-1]))
    return AdStatistic(float(-n - np.mean(terms)), n)


def qq_export(r: RqrSet) -> np.ndarray:
    """(n, 2) table pairing normal plotting quantiles with sorted residuals.

    Column 0 is Phi^{-1}((i - 0.5) / n), column 1 the i-th order statistic.
    """
    z = np.sort(np.asarray(r.residuals, dtype=float))
    n = z.size
    theo = sps.ndtri((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, z])


@dataclass(frozen=True)
class CiWidthRatios:
    """Per-observation ratio of posterior quantile-interval widths (A / B)."""

    obs_id: np.ndarray
    ratio: np.ndarray
    degenerate: np.ndarray  # rows where a zero width forced the convention

    @property
    def n(self) -> int:
        return self.ratio.size


def posterior_quantiles(chain_fit, newdata: DataBlock, p: float) -> np.ndarray:
    """(draws, n) matrix of response quantiles, one row per stored sample."""
    model = chain_fit.model
    names = model.parameter_names
    designs = {n: build_design(newdata, model.predictors[n]) for n in names}
    S = chain_fit.n_samples
    out = np.empty((S, newdata.n))
    for s in range(S):
        params = {}
        for name in names:
            beta = chain_fit.samples[name][s]
            params[name] = model.family.parameter(name).response.value(designs[name] @ beta)
        out[s] = quantile(model.family, p, params)
    return out


def ci_width_ratio(fitA, fitB, newdata: DataBlock, p: float, level: float = 0.95) -> CiWidthRatios:
    """Widths of equal-tailed posterior intervals for the p-quantile, A / B.

    Both fits must carry posterior samples.  When both widths are zero
    (single-draw chains) the ratio is 1 by convention and the row is
    flagged; a zero width on one side only is flagged and left as the
    honest inf or 0.
    """
    lo_p, hi_p = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    widths = []
    for fit in (fitA, fitB):
        q = posterior_quantiles(fit, newdata, p)
        widths.append(np.quantile(q, hi_p, axis=0) - np.quantile(q, lo_p, axis=0))
    wa, wb = widths
    both_zero = (wa == 0.0) & (wb == 0.0)
    degenerate = (wa == 0.0) | (wb == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(both_zero, 1.0, wa / wb)
    return CiWidthRatios(np.arange(newdata.n), ratio, degenerate)
