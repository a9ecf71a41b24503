"""Difference-based long-run variance estimation robust to trends and jumps."""

__version__ = "0.1.0"

from .diffseq import (
    DifferenceSequence,
    binomial_sequence,
    local_sequence,
    normalize,
    optimal_sequence,
    unambiguity_diagnostic,
    zero_sequence,
)
from .estimators import (
    EstimatorConfig,
    LrvResult,
    TimeSeries,
    difference_statistics,
    gamma_hat_d,
    long_run_correlation,
    lrv,
    lrv_multivariate,
    lrv_subsampling,
)
from .exceptions import (
    ConfigError,
    DataError,
    DomainError,
    FactorizationError,
    InsufficientDataError,
    LrvError,
    NumericError,
)
from .inference import TestResult, TrendBand, ks_test, local_linear_trend, scb, wz_test
from .kernels import KernelSpec, k_diff, parse_kernel
from .rcp import RcpReport, remove_jumps, remove_slopes, rough_center
from .selection import PlugInConfig, asymptotic_mse_constant, optimal_bandwidth, preset, suggested_estimator

__all__ = [
    "__version__",
    "DifferenceSequence",
    "binomial_sequence",
    "local_sequence",
    "normalize",
    "optimal_sequence",
    "unambiguity_diagnostic",
    "zero_sequence",
    "EstimatorConfig",
    "LrvResult",
    "TimeSeries",
    "difference_statistics",
    "gamma_hat_d",
    "long_run_correlation",
    "lrv",
    "lrv_multivariate",
    "lrv_subsampling",
    "ConfigError",
    "DataError",
    "DomainError",
    "FactorizationError",
    "InsufficientDataError",
    "LrvError",
    "NumericError",
    "TestResult",
    "TrendBand",
    "ks_test",
    "local_linear_trend",
    "scb",
    "wz_test",
    "KernelSpec",
    "k_diff",
    "parse_kernel",
    "RcpReport",
    "remove_jumps",
    "remove_slopes",
    "rough_center",
    "PlugInConfig",
    "asymptotic_mse_constant",
    "optimal_bandwidth",
    "preset",
    "suggested_estimator",
]
