"""Lognormal-Rician shaping parameter estimation with kNN density estimates."""

from ._lrknn import (
    CampaignError,
    DegenerateSample,
    DensityEstimate,
    EmptyOverlap,
    Error,
    FitFailure,
    FitResult,
    InvalidArgument,
    InvalidParameter,
    LlfConfig,
    NumericError,
    ShapingParams,
    cdf_reference,
    estimate,
    fit,
    initial_estimates,
    k_sweep,
    ks_critical,
    ks_statistic,
    llf_grid,
    llf_mean,
    mse,
    pdf_reference,
    sample,
    second_moment,
)

__all__ = [
    "CampaignError",
    "DegenerateSample",
    "DensityEstimate",
    "EmptyOverlap",
    "Error",
    "FitFailure",
    "FitResult",
    "InvalidArgument",
    "InvalidParameter",
    "LlfConfig",
    "NumericError",
    "ShapingParams",
    "cdf_reference",
    "estimate",
    "fit",
    "initial_estimates",
    "k_sweep",
    "ks_critical",
    "ks_statistic",
    "llf_grid",
    "llf_mean",
    "mse",
    "pdf_reference",
    "sample",
    "second_moment",
]
