"""Additive regression estimation for sampled continuous-time processes.

The package estimates a regression surface observed along a diffusion-like
path, decomposes it into one-dimensional additive components by marginal
integration, and ships a Monte-Carlo harness that measures how fast the
errors shrink as the observation horizon grows.
"""

from .density import (
    DEFAULT_DELTA,
    DensityEstimate,
    density_bandwidth,
    density_check_grid,
    estimate_density,
)
from .experiment import (
    ComparisonResult,
    NumericalError,
    RateStudyConfig,
    RateTable,
    SlopeFit,
    compare_full_vs_additive,
    default_eval_points,
    rate_slope,
    run_rate_study,
    theoretical_slope,
)
from .integration import (
    AdditiveFit,
    FitConfig,
    WeightDensity,
    WeightSystem,
    constant_term,
    evaluate_additive,
    fit_additive,
    gauss_legendre,
    make_weight_system,
    map_to_interval,
    marginal_component,
    prepare_estimator,
    true_eta,
    weight_system_for,
)
from .kernels import (
    Kernel1D,
    ProductKernel,
    SUPPORTED_ORDERS,
    kernel_moment,
    make_kernel,
    product_kernel,
)
from .process import (
    AdditiveModelSpec,
    MODEL_PRESETS,
    OUParams,
    SampledPath,
    attach_response,
    clip_psi,
    simulate_ou_covariates,
    stationary_gaussian_density,
    time_average,
    true_regression,
)
from .regression import (
    BandwidthPlan,
    RegressionEstimator,
    default_regression_kernels,
    estimate_directional,
    estimate_full,
    regression_bandwidths,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveFit",
    "AdditiveModelSpec",
    "BandwidthPlan",
    "ComparisonResult",
    "DensityEstimate",
    "FitConfig",
    "Kernel1D",
    "MODEL_PRESETS",
    "NumericalError",
    "OUParams",
    "ProductKernel",
    "RateStudyConfig",
    "RateTable",
    "RegressionEstimator",
    "SampledPath",
    "SlopeFit",
    "SUPPORTED_ORDERS",
    "DEFAULT_DELTA",
    "WeightDensity",
    "WeightSystem",
    "attach_response",
    "clip_psi",
    "compare_full_vs_additive",
    "constant_term",
    "default_eval_points",
    "default_regression_kernels",
    "density_bandwidth",
    "density_check_grid",
    "estimate_density",
    "estimate_directional",
    "estimate_full",
    "evaluate_additive",
    "fit_additive",
    "gauss_legendre",
    "kernel_moment",
    "make_kernel",
    "make_weight_system",
    "map_to_interval",
    "marginal_component",
    "prepare_estimator",
    "product_kernel",
    "rate_slope",
    "regression_bandwidths",
    "run_rate_study",
    "simulate_ou_covariates",
    "stationary_gaussian_density",
    "theoretical_slope",
    "time_average",
    "true_eta",
    "true_regression",
    "weight_system_for",
]
