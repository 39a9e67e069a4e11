"""Response distributions and response functions.

Families: poisson, negbin, za_negbin (hurdle), normal_ls (location-scale),
gpd (exceedances over a threshold).  Each modeled distribution parameter is
tied to a response function h mapping the unconstrained linear predictor
onto the parameter's support; score_and_info applies the chain rule through
h' and h'' to produce the gradient and curvature of coefficient blocks.

The negative binomial here uses the linear-variance parameterization
Var(Y) = mu * (1 + sigma): the pmf is that of a classical negative binomial
with size mu/sigma and success probability 1/(1+sigma).  Dispersion sigma
enters the zero-adjusted (hurdle) variant the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import special as sps

from .softplus import SoftplusParams, _sigmoid, softplus, softplus_d1, softplus_d2, softplus_inv

__all__ = [
    "NumericalError",
    "ResponseFunction",
    "IdentityResponse",
    "ExponentialResponse",
    "SoftplusResponse",
    "LogisticResponse",
    "response_function",
    "ParameterDef",
    "FamilySpec",
    "make_family",
    "log_density",
    "cdf",
    "quantile",
    "family_mean",
    "score_and_info",
    "chol_with_ridge",
]


class NumericalError(RuntimeError):
    """Raised when a numeric routine produces non-finite or unusable values."""


# ---------------------------------------------------------------------------
# response functions


@dataclass(frozen=True)
class IdentityResponse:
    kind: str = "identity"

    def value(self, eta):
        return np.asarray(eta, dtype=float)

    def deriv(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))

    def deriv2(self, eta):
        return np.zeros_like(np.asarray(eta, dtype=float))

    def inverse(self, theta):
        return np.asarray(theta, dtype=float)


@dataclass(frozen=True)
class ExponentialResponse:
    kind: str = "exponential"

    def value(self, eta):
        return np.exp(np.asarray(eta, dtype=float))

    def deriv(self, eta):
        return np.exp(np.asarray(eta, dtype=float))

    def deriv2(self, eta):
        return np.exp(np.asarray(eta, dtype=float))

    def inverse(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0.0):
            raise ValueError("exponential response inverse needs theta > 0")
        return np.log(theta)


@dataclass(frozen=True)
class SoftplusResponse:
    params: SoftplusParams
    kind: str = "softplus"

    def value(self, eta):
        return softplus(self.params, np.asarray(eta, dtype=float))

    def deriv(self, eta):
        return softplus_d1(self.params, np.asarray(eta, dtype=float))

    def deriv2(self, eta):
        return softplus_d2(self.params, np.asarray(eta, dtype=float))

    def inverse(self, theta):
        return softplus_inv(self.params, np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class LogisticResponse:
    kind: str = "logistic"

    def value(self, eta):
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        return _sigmoid(eta)

    def deriv(self, eta):
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        return _sigmoid(eta) * _sigmoid(-eta)

    def deriv2(self, eta):
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        s = _sigmoid(eta)
        return s * _sigmoid(-eta) * (1.0 - 2.0 * s)

    def inverse(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0.0) or np.any(theta >= 1.0):
            raise ValueError("logistic response inverse needs theta in (0, 1)")
        return np.log(theta) - np.log1p(-theta)


ResponseFunction = IdentityResponse | ExponentialResponse | SoftplusResponse | LogisticResponse


def response_function(kind: str, a: float | None = None) -> ResponseFunction:
    """Build a response function from its name; softplus takes sharpness a."""
    if kind == "identity":
        return IdentityResponse()
    if kind == "exponential":
        return ExponentialResponse()
    if kind == "logistic":
        return LogisticResponse()
    if kind == "softplus":
        if a is None:
            raise ValueError("softplus response needs a sharpness value a")
        return SoftplusResponse(SoftplusParams(a))
    raise ValueError(f"unknown response function {kind!r}")


# ---------------------------------------------------------------------------
# family specifications

# parameter catalog: (name, support) per family, in block-update order
_FAMILY_PARAMS: dict[str, tuple[tuple[str, str], ...]] = {
    "poisson": (("mu", "positive"),),
    "negbin": (("mu", "positive"), ("sigma", "positive")),
    "za_negbin": (("mu", "positive"), ("sigma", "positive"), ("pi", "unit")),
    "normal_ls": (("mu", "real"), ("sigma", "positive")),
    "gpd": (("sigma", "positive"), ("gamma", "positive")),
}

_DISCRETE = frozenset({"poisson", "negbin", "za_negbin"})


@dataclass(frozen=True)
class ParameterDef:
    name: str
    support: str  # "positive" | "real" | "unit"
    response: ResponseFunction


@dataclass(frozen=True)
class FamilySpec:
    family: str
    parameters: tuple[ParameterDef, ...]

    def __post_init__(self) -> None:
        if self.family not in _FAMILY_PARAMS:
            raise ValueError(f"unknown family {self.family!r}")
        catalog = _FAMILY_PARAMS[self.family]
        if tuple((p.name, p.support) for p in self.parameters) != catalog:
            raise ValueError(f"{self.family} parameters must be {[c[0] for c in catalog]}")
        for p in self.parameters:
            if p.support == "positive" and p.response.kind not in ("exponential", "softplus"):
                raise ValueError(f"{p.name} > 0 needs an exponential or softplus response")
            if p.support == "real" and p.response.kind != "identity":
                raise ValueError(f"unconstrained {p.name} uses the identity response")
            if p.support == "unit" and p.response.kind != "logistic":
                raise ValueError(f"{p.name} in (0,1) uses the logistic response")

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def parameter(self, name: str) -> ParameterDef:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def discrete(self) -> bool:
        return self.family in _DISCRETE


def make_family(family: str, **responses: ResponseFunction) -> FamilySpec:
    """Assemble a FamilySpec, defaulting responses by parameter support.

    Positive parameters default to the exponential response; unconstrained
    ones get the identity and unit-interval ones the logistic (those two are
    fixed and cannot be overridden).
    """
    if family not in _FAMILY_PARAMS:
        raise ValueError(f"unknown family {family!r}")
    defaults = {"positive": ExponentialResponse(), "real": IdentityResponse(), "unit": LogisticResponse()}
    params = []
    seen = set(responses)
    for name, support in _FAMILY_PARAMS[family]:
        seen.discard(name)
        params.append(ParameterDef(name, support, responses.get(name, defaults[support])))
    if seen:
        raise ValueError(f"{family} has no parameter named {sorted(seen)[0]!r}")
    return FamilySpec(family, tuple(params))


def _check_support(f: FamilySpec, params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    out = {}
    for p in f.parameters:
        if p.name not in params:
            raise ValueError(f"missing parameter {p.name!r} for family {f.family}")
        v = np.asarray(params[p.name], dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{p.name} contains non-finite values")
        if p.support == "positive" and np.any(v <= 0.0):
            raise ValueError(f"{p.name} must be positive")
        if p.support == "unit" and (np.any(v <= 0.0) or np.any(v >= 1.0)):
            raise ValueError(f"{p.name} must lie in (0, 1)")
        out[p.name] = v
    return out


# ---------------------------------------------------------------------------
# densities, distribution functions, quantiles


def _log1mexp(g):
    """log(1 - exp(g)) for g < 0, split at -log 2 against cancellation."""
    g = np.asarray(g, dtype=float)
    out = np.empty_like(g)
    lo = g < -math.log(2.0)
    out[lo] = np.log1p(-np.exp(g[lo]))
    out[~lo] = np.log(-np.expm1(g[~lo]))
    return out


def _nb_logpmf(y, mu, sigma):
    r = mu / sigma
    return (
        sps.gammaln(y + r)
        - sps.gammaln(r)
        - sps.gammaln(y + 1.0)
        - r * np.log1p(sigma)
        + y * (np.log(sigma) - np.log1p(sigma))
    )


def _nb_log_p0(mu, sigma):
    return -(mu / sigma) * np.log1p(sigma)


def log_density(f: FamilySpec, y, params: Mapping[str, np.ndarray]):
    """Per-observation log density/mass; broadcasts y against parameters."""
    pv = _check_support(f, params)
    y = np.asarray(y, dtype=float)
    if f.family == "poisson":
        mu = pv["mu"]
        return y * np.log(mu) - mu - sps.gammaln(y + 1.0)
    if f.family == "negbin":
        return _nb_logpmf(y, pv["mu"], pv["sigma"])
    if f.family == "za_negbin":
        mu, sigma, pi = pv["mu"], pv["sigma"], pv["pi"]
        y_b, mu_b, sigma_b, pi_b = np.broadcast_arrays(y, mu, sigma, pi)
        pos = np.where(y_b > 0, y_b, 1.0)
        lp = (
            np.log1p(-pi_b)
            + _nb_logpmf(pos, mu_b, sigma_b)
            - _log1mexp(_nb_log_p0(mu_b, sigma_b))
        )
        return np.where(y_b == 0, np.log(pi_b), lp)
    if f.family == "normal_ls":
        mu, sigma = pv["mu"], pv["sigma"]
        z = (y - mu) / sigma
        return -0.5 * math.log(2.0 * math.pi) - np.log(sigma) - 0.5 * z * z
    if f.family == "gpd":
        sigma, gamma = pv["sigma"], pv["gamma"]
        if np.any(y < 0.0):
            raise ValueError("gpd exceedances must be positive")
        return -np.log(sigma) - (1.0 / gamma + 1.0) * np.log1p(gamma * y / sigma)
    raise AssertionError(f.family)


def cdf(f: FamilySpec, y, params: Mapping[str, np.ndarray]):
    """Distribution function; for count families a right-continuous step."""
    pv = _check_support(f, params)
    y = np.asarray(y, dtype=float)
    if f.family == "poisson":
        mu = pv["mu"]
        k = np.floor(np.maximum(y, 0.0))
        return np.where(y < 0.0, 0.0, sps.gammaincc(k + 1.0, mu))
    if f.family == "negbin":
        mu, sigma = pv["mu"], pv["sigma"]
        r = mu / sigma
        q = 1.0 / (1.0 + sigma)
        k = np.floor(np.maximum(y, 0.0))
        return np.where(y < 0.0, 0.0, sps.betainc(r, k + 1.0, q))
    if f.family == "za_negbin":
        mu, sigma, pi = pv["mu"], pv["sigma"], pv["pi"]
        y_b, mu_b, sigma_b, pi_b = np.broadcast_arrays(y, mu, sigma, pi)
        r = mu_b / sigma_b
        q = 1.0 / (1.0 + sigma_b)
        p0 = np.exp(_nb_log_p0(mu_b, sigma_b))
        k = np.floor(np.maximum(y_b, 1.0))
        base = sps.betainc(r, k + 1.0, q)
        out = pi_b + (1.0 - pi_b) * (base - p0) / (1.0 - p0)
        out = np.where(y_b < 1.0, pi_b, out)
        return np.where(y_b < 0.0, 0.0, out)
    if f.family == "normal_ls":
        return sps.ndtr((y - pv["mu"]) / pv["sigma"])
    if f.family == "gpd":
        sigma, gamma = pv["sigma"], pv["gamma"]
        t = np.log1p(gamma * np.maximum(y, 0.0) / sigma)
        return np.where(y < 0.0, 0.0, -np.expm1(-t / gamma))
    raise AssertionError(f.family)


def _count_quantile(cdf_at, p: float, shape) -> np.ndarray:
    """Smallest integer y >= 0 with cdf(y) >= p, by doubling then bisection."""
    lo = np.full(shape, -1.0)  # invariant: cdf(lo) < p
    hi = np.ones(shape)
    at_zero = cdf_at(np.zeros(shape)) >= p
    for _ in range(1024):
        short = ~at_zero & (cdf_at(hi) < p)
        if not np.any(short):
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, hi * 2.0, hi)
    else:
        raise NumericalError("count quantile bracket did not close")
    while np.any(hi - lo > 1.0):
        mid = np.floor((lo + hi) / 2.0)
        ge = cdf_at(mid) >= p
        hi = np.where(ge, mid, hi)
        lo = np.where(ge, lo, mid)
    return np.where(at_zero, 0.0, hi)


def quantile(f: FamilySpec, p: float, params: Mapping[str, np.ndarray]):
    """Quantile function at probability p (scalar, strictly inside (0,1))."""
    if not (0.0 < p < 1.0):
        raise ValueError("quantile level must lie strictly between 0 and 1")
    pv = _check_support(f, params)
    if f.family == "normal_ls":
        mu, sigma = pv["mu"], pv["sigma"]
        return mu + math.sqrt(2.0) * sigma * sps.erfinv(2.0 * p - 1.0)
    if f.family == "gpd":
        sigma, gamma = pv["sigma"], pv["gamma"]
        return (sigma / gamma) * np.expm1(-gamma * np.log1p(-p))
    shape = np.broadcast_shapes(*(np.shape(v) for v in pv.values())) or (1,)
    squeeze = all(np.ndim(v) == 0 for v in pv.values())
    bp = {k: np.broadcast_to(v, shape) for k, v in pv.items()}
    out = _count_quantile(lambda yy: cdf(f, yy, bp), p, shape)
    return float(out[0]) if squeeze else out


def family_mean(f: FamilySpec, params: Mapping[str, np.ndarray]):
    """Mean of the response distribution (inf for gpd when gamma >= 1)."""
    pv = _check_support(f, params)
    if f.family in ("poisson", "negbin"):
        return pv["mu"] + 0.0
    if f.family == "za_negbin":
        mu, sigma, pi = pv["mu"], pv["sigma"], pv["pi"]
        p0 = np.exp(_nb_log_p0(mu, sigma))
        return (1.0 - pi) * mu / (1.0 - p0)
    if f.family == "normal_ls":
        return pv["mu"] + 0.0
    if f.family == "gpd":
        sigma, gamma = pv["sigma"], pv["gamma"]
        with np.errstate(divide="ignore"):
            return np.where(gamma < 1.0, sigma / (1.0 - gamma), np.inf)
    raise AssertionError(f.family)


# ---------------------------------------------------------------------------
# score and curvature per distribution parameter
#
# For each (family, parameter) we provide u = dl/dtheta per observation and
# the negated second derivative -d2l/dtheta2 ("ndd"), plus the expectation
# of the latter where a closed form exists.  Coefficient-block gradients and
# information matrices follow by the chain rule through the response h:
#   g = X' (u * h'),   W_obs = ndd * h'^2 - u * h'',   W_exp = E[ndd] * h'^2.


def _nb_mu_terms(y, mu, sigma):
    r = mu / sigma
    A = sps.digamma(y + r) - sps.digamma(r) - np.log1p(sigma)
    B = sps.polygamma(1, y + r) - sps.polygamma(1, r)
    return A, B


def _score_terms(f: FamilySpec, y, pv, name):
    """Return (u, ndd, expected_ndd or None) for one distribution parameter."""
    if f.family == "poisson":
        mu = pv["mu"]
        return y / mu - 1.0, y / (mu * mu), 1.0 / mu

    if f.family == "negbin":
        mu, sigma = pv["mu"], pv["sigma"]
        A, B = _nb_mu_terms(y, mu, sigma)
        if name == "mu":
            return A / sigma, -B / (sigma * sigma), None
        s1 = 1.0 + sigma
        u = -(mu / sigma**2) * A - (mu / sigma) / s1 + y / (sigma * s1)
        d2 = (
            (2.0 * mu / sigma**3) * A
            + (mu * mu / sigma**4) * B
            + 2.0 * (mu / sigma**2) / s1
            + (mu / sigma) / s1**2
            - y * (1.0 + 2.0 * sigma) / (sigma * s1) ** 2
        )
        return u, -d2, None

    if f.family == "za_negbin":
        return _za_terms(y, pv, name)

    if f.family == "normal_ls":
        mu, sigma = pv["mu"], pv["sigma"]
        z = y - mu
        if name == "mu":
            ndd = np.broadcast_to(1.0 / sigma**2, np.broadcast_shapes(np.shape(y), np.shape(sigma)))
            return z / sigma**2, ndd, 1.0 / sigma**2
        return -1.0 / sigma + z * z / sigma**3, -1.0 / sigma**2 + 3.0 * z * z / sigma**4, 2.0 / sigma**2

    if f.family == "gpd":
        sigma, gamma = pv["sigma"], pv["gamma"]
        w = y / sigma
        t = 1.0 + gamma * w
        if name == "sigma":
            u = (-1.0 + (1.0 + gamma) * w / t) / sigma
            ndd = (-1.0 + (1.0 + gamma) * w * (2.0 + gamma * w) / t**2) / sigma**2
            return u, ndd, None
        lt = np.log1p(gamma * w)
        u = lt / gamma**2 - (1.0 / gamma + 1.0) * w / t
        ndd = 2.0 * lt / gamma**3 - 2.0 * w / (gamma**2 * t) - (1.0 / gamma + 1.0) * (w / t) ** 2
        return u, ndd, None

    raise AssertionError(f.family)


def _za_terms(y, pv, name):
    mu, sigma, pi = pv["mu"], pv["sigma"], pv["pi"]
    y, mu, sigma, pi = np.broadcast_arrays(np.asarray(y, float), mu, sigma, pi)
    zero = y == 0

    if name == "pi":
        u = np.where(zero, 1.0 / pi, -1.0 / (1.0 - pi))
        ndd = np.where(zero, 1.0 / pi**2, 1.0 / (1.0 - pi) ** 2)
        return u, ndd, 1.0 / (pi * (1.0 - pi))

    # positive part: base pmf terms plus the -log(1 - P0) truncation term
    ypos = np.where(zero, 1.0, y)
    s1 = 1.0 + sigma
    log1ps = np.log1p(sigma)
    p0 = np.exp(_nb_log_p0(mu, sigma))
    om = 1.0 - p0

    if name == "mu":
        A, B = _nb_mu_terms(ypos, mu, sigma)
        k = log1ps / sigma
        u = A / sigma - k * p0 / om
        ndd = -B / sigma**2 - (k * k) * p0 / om**2
        return np.where(zero, 0.0, u), np.where(zero, 0.0, ndd), None

    # sigma block
    A, B = _nb_mu_terms(ypos, mu, sigma)
    u_nb = -(mu / sigma**2) * A - (mu / sigma) / s1 + ypos / (sigma * s1)
    d2_nb = (
        (2.0 * mu / sigma**3) * A
        + (mu * mu / sigma**4) * B
        + 2.0 * (mu / sigma**2) / s1
        + (mu / sigma) / s1**2
        - ypos * (1.0 + 2.0 * sigma) / (sigma * s1) ** 2
    )
    kp = (sigma / s1 - log1ps) / sigma**2
    kpp = -1.0 / (sigma * s1**2) - 2.0 * (sigma / s1 - log1ps) / sigma**3
    p0_d1 = -mu * kp * p0
    p0_d2 = (-mu * kpp + (mu * kp) ** 2) * p0
    u = u_nb + p0_d1 / om
    d2 = d2_nb + p0_d2 / om + (p0_d1 / om) ** 2
    return np.where(zero, 0.0, u), np.where(zero, 0.0, -d2), None


def _beta_of(block) -> np.ndarray:
    """Accept either a bare coefficient vector or an object carrying .beta."""
    return np.asarray(getattr(block, "beta", block), dtype=float)


# (family, parameter) pairs with a closed-form expected information
_HAS_EXPECTED = frozenset(
    {("poisson", "mu"), ("normal_ls", "mu"), ("normal_ls", "sigma"), ("za_negbin", "pi")}
)


def default_info_kind(f: FamilySpec, name: str) -> str:
    return "expected" if (f.family, name) in _HAS_EXPECTED else "observed"


def score_and_info(
    f: FamilySpec,
    y,
    designs: Mapping[str, np.ndarray],
    betas: Mapping[str, np.ndarray],
    target: str,
    prior=None,
    info: str | None = None,
):
    """Gradient and information of a coefficient block of the log posterior.

    designs/betas hold one design matrix and coefficient vector per family
    parameter; target names the block being differentiated.  info selects
    "expected" or "observed" curvature; the default is expected where a
    closed form exists (poisson mu, normal_ls both, hurdle pi) and observed
    elsewhere.  A normal prior contributes -beta/sd^2 to the gradient and
    1/sd^2 on the information diagonal; a flat prior contributes nothing.
    """
    y = np.asarray(y, dtype=float)
    pdef = f.parameter(target)
    coef = {p.name: _beta_of(betas[p.name]) for p in f.parameters}
    etas = {p.name: designs[p.name] @ coef[p.name] for p in f.parameters}
    pv = _check_support(f, {p.name: p.response.value(etas[p.name]) for p in f.parameters})

    kind = info or default_info_kind(f, target)
    if kind not in ("expected", "observed"):
        raise ValueError(f"info must be 'expected' or 'observed', got {info!r}")
    u, ndd, expected = _score_terms(f, y, pv, target)
    h1 = pdef.response.deriv(etas[target])
    if kind == "expected":
        if expected is None:
            raise ValueError(f"no closed-form expected information for {f.family}.{target}")
        w = np.broadcast_to(expected, np.shape(u)) * h1 * h1
    else:
        w = ndd * h1 * h1 - u * pdef.response.deriv2(etas[target])

    su = u * h1
    bad = ~(np.isfinite(su) & np.isfinite(w))
    if np.any(bad):
        raise NumericalError(f"non-finite score contribution at row {int(np.flatnonzero(bad)[0])}")

    X = designs[target]
    g = X.T @ su
    F = X.T @ (X * w[:, None])
    F = 0.5 * (F + F.T)
    if prior is not None and getattr(prior, "kind", "flat") == "normal":
        beta = coef[target]
        g = g - beta / prior.sd**2
        F = F + np.eye(len(beta)) / prior.sd**2
    return g, F


def chol_with_ridge(F: np.ndarray, max_repairs: int | None = None):
    """Cholesky factor of F, adding a doubling ridge when F is not PD.

    Returns (L, repairs) where repairs counts the failed factorizations.
    Raises NumericalError once max_repairs failures are exceeded (or after
    60 escalations when unbounded).
    """
    limit = 60 if max_repairs is None else max_repairs
    diag_scale = float(np.max(np.diag(F))) if F.size else 0.0
    ridge = 1e-6 * (diag_scale if diag_scale > 0.0 else 1.0)
    bump = 0.0
    for repairs in range(limit + 1):
        try:
            L = np.linalg.cholesky(F + bump * np.eye(F.shape[0]))
            return L, repairs
        except np.linalg.LinAlgError:
            bump = ridge if bump == 0.0 else 2.0 * bump
    raise NumericalError(f"information matrix not positive definite after {limit} ridge repairs")
