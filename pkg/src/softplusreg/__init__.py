"""Distributional regression with softplus response functions.

Stable softplus kernels, five response distributions with per-parameter
response functions, MLE and MCMC fitting with Fisher-scoring proposals,
DIC, randomized quantile residuals, and the simulation studies that
exercise them.
"""

__version__ = "0.1.0"

from .softplus import (
    LinearityQuery,
    SoftplusParams,
    linear_threshold,
    lse2,
    rect_gap,
    rerr,
    softplus,
    softplus_d1,
    softplus_d2,
    softplus_inv,
)
from .families import (
    ExponentialResponse,
    FamilySpec,
    IdentityResponse,
    LogisticResponse,
    NumericalError,
    SoftplusResponse,
    cdf,
    chol_with_ridge,
    family_mean,
    log_density,
    make_family,
    quantile,
    response_function,
    score_and_info,
)
from .model import (
    CoefficientBlock,
    ConfigError,
    DataBlock,
    ModelSpec,
    PredictorSpec,
    PriorSpec,
    build_design,
    build_designs,
    linear_predictor,
    predict,
)
from .mle import MleResult, fit_mle, init_coefficients
from .mcmc import (
    Chain,
    ChainSettings,
    DicResult,
    PosteriorSummary,
    SummaryRow,
    dic,
    iwls_proposal,
    mh_iwls_step,
    run_chain,
    summarize,
)
from .diagnostics import (
    AdStatistic,
    CiWidthRatios,
    RqrSet,
    ad_statistic,
    ci_width_ratio,
    posterior_quantiles,
    qq_export,
    rqr,
)
from .experiments import (
    DIC_THRESHOLDS,
    CoverageReport,
    DicSelectionReport,
    GpdTailReport,
    GpdTailSpec,
    ScenarioSpec,
    run_coverage_study,
    run_dic_selection_study,
    run_gpd_tail_study,
    simulate_dataset,
)

__all__ = [
    "__version__",
    "LinearityQuery",
    "SoftplusParams",
    "linear_threshold",
    "lse2",
    "rect_gap",
    "rerr",
    "softplus",
    "softplus_d1",
    "softplus_d2",
    "softplus_inv",
    "ExponentialResponse",
    "FamilySpec",
    "IdentityResponse",
    "LogisticResponse",
    "NumericalError",
    "SoftplusResponse",
    "cdf",
    "chol_with_ridge",
    "family_mean",
    "log_density",
    "make_family",
    "quantile",
    "response_function",
    "score_and_info",
    "CoefficientBlock",
    "ConfigError",
    "DataBlock",
    "ModelSpec",
    "PredictorSpec",
    "PriorSpec",
    "build_design",
    "build_designs",
    "linear_predictor",
    "predict",
    "MleResult",
    "fit_mle",
    "init_coefficients",
    "Chain",
    "ChainSettings",
    "DicResult",
    "PosteriorSummary",
    "SummaryRow",
    "dic",
    "iwls_proposal",
    "mh_iwls_step",
    "run_chain",
    "summarize",
    "AdStatistic",
    "CiWidthRatios",
    "RqrSet",
    "ad_statistic",
    "ci_width_ratio",
    "posterior_quantiles",
    "qq_export",
    "rqr",
    "DIC_THRESHOLDS",
    "CoverageReport",
    "DicSelectionReport",
    "GpdTailReport",
    "GpdTailSpec",
    "ScenarioSpec",
    "run_coverage_study",
    "run_dic_selection_study",
    "run_gpd_tail_study",
    "simulate_dataset",
]
