"""Stable kernels for the generalized softplus function.

softplus_a(x) = log(1 + exp(a*x)) / a  with sharpness a > 0.

The naive form overflows once a*x exceeds ~709 in 64-bit floats, so every
evaluation goes through the rectifier-plus-remainder split

    softplus_a(x) = max(0, x) + log1p(exp(-|a*x|)) / a

which is exact in both tails.  All functions accept scalars or numpy arrays
and are pure; scalar input yields a Python float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SoftplusParams",
    "LinearityQuery",
    "softplus",
    "softplus_inv",
    "softplus_d1",
    "softplus_d2",
    "rect_gap",
    "rerr",
    "linear_threshold",
    "lse2",
]

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SoftplusParams:
    """Sharpness parameter a > 0 of the generalized softplus."""

    a: float

    def __post_init__(self) -> None:
        a = float(self.a)
        if not math.isfinite(a) or a <= 0.0:
            raise ValueError(f"sharpness must be a finite positive number, got {self.a!r}")
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class LinearityQuery:
    """Inputs for the linearity-threshold computation.

    gamma is the coefficient (or predictor change) of interest on the
    predictor scale; alpha is the acceptable relative error in (0, 1).
    """

    a: float
    gamma: float
    alpha: float = 0.05

    def __post_init__(self) -> None:
        a = float(self.a)
        gamma = float(self.gamma)
        alpha = float(self.alpha)
        if not math.isfinite(a) or a <= 0.0:
            raise ValueError(f"sharpness must be a finite positive number, got {self.a!r}")
        if not math.isfinite(gamma) or gamma == 0.0:
            raise ValueError("gamma must be finite and nonzero")
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"alpha must lie strictly between 0 and 1, got {self.alpha!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "alpha", alpha)


def _checked(x) -> tuple[np.ndarray, bool]:
    """Coerce to a float array, reject NaN, and report scalar-ness."""
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("NaN input")
    return arr, arr.ndim == 0


def _ret(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def softplus(p: SoftplusParams, x):
    """Evaluate softplus_a(x) = max(0, x) + log1p(exp(-|a*x|)) / a.

    Finite for every finite x; no overflow for any 64-bit representable
    argument.  For a*x below roughly -745 the remainder underflows and the
    returned value collapses to the rectifier max(0, x).
    """
    arr, scalar = _checked(x)
    z = p.a * arr
    out = np.maximum(arr, 0.0) + np.log1p(np.exp(-np.abs(z))) / p.a
    return _ret(out, scalar)


def softplus_inv(p: SoftplusParams, y):
    """Invert softplus: return the x with softplus_a(x) = y, for y > 0.

    Split at a*y = log 2 to dodge cancellation on both branches:
      a*y >  log 2:  y + log1p(-exp(-a*y)) / a
      a*y <= log 2:  log(expm1(a*y)) / a
    """
    arr, scalar = _checked(y)
    if not np.isfinite(arr).all() or np.any(arr <= 0.0):
        raise ValueError("inverse softplus needs finite y > 0")
    src = np.atleast_1d(arr)
    z = p.a * src
    out = np.empty_like(z)
    hi = z > _LOG2
    out[hi] = src[hi] + np.log1p(-np.exp(-z[hi])) / p.a
    out[~hi] = np.log(np.expm1(z[~hi])) / p.a
    return float(out[0]) if scalar else out.reshape(arr.shape)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function with the usual sign-branched stable evaluation."""
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus_d1(p: SoftplusParams, x):
    """First derivative: the logistic function 1 / (1 + exp(-a*x))."""
    arr, scalar = _checked(x)
    out = _sigmoid(p.a * np.atleast_1d(arr))
    return float(out[0]) if scalar else out.reshape(arr.shape)


def softplus_d2(p: SoftplusParams, x):
    """Second derivative a * s * (1 - s) with s the logistic of a*x.

    The (1 - s) factor is evaluated as the logistic at -a*x, which stays
    accurate where 1 - s would round to zero.  Maximum a/4 at x = 0.
    """
    arr, scalar = _checked(x)
    z = np.atleast_1d(p.a * arr)
    out = p.a * _sigmoid(z) * _sigmoid(-z)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def rect_gap(p: SoftplusParams, x):
    """Gap softplus_a(x) - max(0, x), evaluated as log1p(exp(-|a*x|)) / a.

    This form never cancels, so it resolves gaps far below the spacing of
    floats around softplus(x) itself.  Bounded by log(2)/a, attained at 0.
    """
    arr, scalar = _checked(x)
    out = np.log1p(np.exp(-np.abs(p.a * arr))) / p.a
    return _ret(out, scalar)


def rerr(p: SoftplusParams, x1, x2):
    """Relative error 1 - (softplus(x2) - softplus(x1)) / (x2 - x1).

    Measures how far the softplus secant over [x1, x2] falls short of the
    identity's slope 1; symmetric in its arguments.  Coincident points are
    rejected (the pointwise limit 1 - softplus_d1 is a different quantity).
    """
    a1, s1 = _checked(x1)
    a2, s2 = _checked(x2)
    if np.any(a1 == a2):
        raise ValueError("rerr needs two distinct predictor values")
    out = 1.0 - (softplus(p, a2) - softplus(p, a1)) / (a2 - a1)
    return _ret(np.asarray(out), s1 and s2)


def linear_threshold(q: LinearityQuery) -> float:
    """Smallest T with rerr(T, T + gamma) <= alpha, by bisection.

    rerr(T, T + gamma) decreases monotonically in T and tends to 0, so a
    sign change always exists; the initial bracket is widened geometrically
    in whichever direction fails.  Bisection runs to |hi - lo| < 1e-8 and
    the returned hi endpoint satisfies the rerr bound by construction.
    """
    p = SoftplusParams(q.a)

    def excess(t: float) -> float:
        return rerr(p, t, t + q.gamma) - q.alpha

    lo = -10.0 / q.a - abs(q.gamma)
    hi = 50.0 / q.a + abs(q.gamma)
    span = hi - lo
    while excess(hi) > 0.0:
        hi += span
        span *= 2.0
    while excess(lo) <= 0.0:
        lo -= span
        span *= 2.0
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def lse2(x, y):
    """log(exp(x) + exp(y)) via max(x, y) + log1p(exp(-|x - y|)).

    Never overflows; -inf arguments are handled (lse2(-inf, v) = v and
    lse2(-inf, -inf) = -inf).
    """
    xa, sx = _checked(x)
    ya, sy = _checked(y)
    m = np.maximum(xa, ya)
    with np.errstate(invalid="ignore"):
        d = -np.abs(xa - ya)
        out = np.where(np.isneginf(m), -np.inf, m + np.log1p(np.exp(d)))
    return _ret(out, sx and sy)
