"""Data model: data blocks, predictor specifications, priors, prediction.

A model couples a FamilySpec with one PredictorSpec per distribution
parameter (linear effects plus optional intercept) and a prior per
coefficient block.  Design matrices are plain numpy arrays built once and
reused by both inference engines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .families import FamilySpec, family_mean, quantile

__all__ = [
    "ConfigError",
    "DataBlock",
    "PredictorSpec",
    "CoefficientBlock",
    "PriorSpec",
    "ModelSpec",
    "build_design",
    "build_designs",
    "linear_predictor",
    "response_vector",
    "predict",
]


class ConfigError(Exception):
    """Invalid configuration: bad column names, shapes, files, or settings."""


@dataclass(frozen=True)
class DataBlock:
    """Response vector plus named covariate columns; immutable after init.

    threshold is the exceedance offset for gpd data: when set, y must lie
    strictly above it and fitting acts on y - threshold.
    """

    y: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    threshold: float | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ConfigError("response must be a non-empty 1-d vector")
        if not np.all(np.isfinite(y)):
            raise ConfigError("response contains missing or non-finite values")
        cov = {}
        for name, col in dict(self.covariates).items():
            c = np.asarray(col, dtype=float)
            if c.shape != y.shape:
                raise ConfigError(f"covariate {name!r} has length {c.size}, expected {y.size}")
            if not np.all(np.isfinite(c)):
                raise ConfigError(f"covariate {name!r} contains missing or non-finite values")
            cov[name] = c
        if self.threshold is not None:
            tau = float(self.threshold)
            if np.any(y <= tau):
                raise ConfigError("all responses must exceed the threshold")
            object.__setattr__(self, "threshold", tau)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", cov)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def exceedances(self) -> np.ndarray:
        return self.y - self.threshold if self.threshold is not None else self.y


@dataclass(frozen=True)
class PredictorSpec:
    """Linear predictor layout for one distribution parameter."""

    parameter: str
    columns: tuple[str, ...] = ()
    intercept: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise ConfigError(f"duplicate covariate in predictor for {self.parameter!r}")
        if not self.intercept and not self.columns:
            raise ConfigError(f"predictor for {self.parameter!r} is empty")

    @property
    def n_coefficients(self) -> int:
        return len(self.columns) + (1 if self.intercept else 0)

    @property
    def coefficient_names(self) -> tuple[str, ...]:
        base = ("intercept",) if self.intercept else ()
        return base + self.columns


@dataclass(frozen=True)
class CoefficientBlock:
    parameter: str
    beta: np.ndarray

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1:
            raise ConfigError("coefficient vector must be 1-d")
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class PriorSpec:
    """Flat (improper) prior or independent zero-mean normal with given sd."""

    kind: str = "flat"
    sd: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("flat", "normal"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if self.kind == "normal":
            if self.sd is None or not float(self.sd) > 0.0:
                raise ConfigError("normal prior needs sd > 0")
            object.__setattr__(self, "sd", float(self.sd))

    def log_density(self, beta: np.ndarray) -> float:
        if self.kind == "flat":
            return 0.0
        return float(-0.5 * np.sum(beta**2) / self.sd**2)


@dataclass(frozen=True)
class ModelSpec:
    """Family plus per-parameter predictors and priors."""

    family: FamilySpec
    predictors: Mapping[str, PredictorSpec]
    priors: Mapping[str, PriorSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = self.family.parameter_names
        preds = dict(self.predictors)
        if set(preds) != set(names):
            raise ConfigError(f"predictors must cover exactly the parameters {list(names)}")
        pri = dict(self.priors)
        for extra in set(pri) - set(names):
            raise ConfigError(f"prior given for unknown parameter {extra!r}")
        for name in names:
            pri.setdefault(name, PriorSpec())
        object.__setattr__(self, "predictors", preds)
        object.__setattr__(self, "priors", pri)

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return self.family.parameter_names


def build_design(data: DataBlock, spec: PredictorSpec) -> np.ndarray:
    """n x p design matrix: all-ones intercept column first, then columns."""
    cols = []
    if spec.intercept:
        cols.append(np.ones(data.n))
    for name in spec.columns:
        if name not in data.covariates:
            raise ConfigError(f"unknown covariate column {name!r}")
        cols.append(data.covariates[name])
    return np.column_stack(cols)


def build_designs(data: DataBlock, model: ModelSpec) -> dict[str, np.ndarray]:
    """One design matrix per distribution parameter; validates n >= p."""
    designs = {}
    for name in model.parameter_names:
        X = build_design(data, model.predictors[name])
        if data.n < X.shape[1]:
            raise ConfigError(f"only {data.n} rows for {X.shape[1]} coefficients of {name!r}")
        designs[name] = X
    return designs


def linear_predictor(design: np.ndarray, block: CoefficientBlock) -> np.ndarray:
    if design.shape[1] != block.beta.size:
        raise ConfigError(
            f"design for {block.parameter!r} has {design.shape[1]} columns, "
            f"coefficient vector has {block.beta.size}"
        )
    return design @ block.beta


def response_vector(model: ModelSpec, data: DataBlock) -> np.ndarray:
    """The vector the likelihood sees: exceedances for gpd, y otherwise."""
    if model.family.family == "gpd":
        z = data.exceedances
        if np.any(z <= 0.0):
            raise ConfigError("gpd requires strictly positive exceedances")
        return z
    if data.threshold is not None:
        raise ConfigError("threshold only applies to the gpd family")
    return data.y


def predict(fit, newdata: DataBlock, what: str = "parameters", p: float | None = None):
    """Plug-in prediction from a fit's coefficients (MLE or posterior mean).

    what selects per-observation distribution parameters, the distribution
    mean, or a quantile at level p.  fit must expose .model and a mapping
    .coefficients of CoefficientBlock per parameter.
    """
    model: ModelSpec = fit.model
    params = {}
    for name in model.parameter_names:
        X = build_design(newdata, model.predictors[name])
        eta = linear_predictor(X, fit.coefficients[name])
        params[name] = model.family.parameter(name).response.value(eta)
    if what == "parameters":
        return params
    if what == "mean":
        return family_mean(model.family, params)
    if what == "quantile":
        if p is None:
            raise ConfigError("quantile prediction needs a level p")
        return quantile(model.family, p, params)
    raise ConfigError(f"unknown prediction target {what!r}")
