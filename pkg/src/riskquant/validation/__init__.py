"""
A-posteriori validation: twin-simulation estimators, accuracy metrics and the
nested Monte Carlo benchmark.
"""
from src.riskquant.validation.metrics import (
    convergence_slope,
    crossing_rate,
    normalized_rmse,
    pair_key,
    wasserstein_1d,
)
from src.riskquant.validation.nested import (
    FunctionSampler,
    GaussianNodeSampler,
    NestedInit,
    NestedMcConfig,
    NestedResult,
    SaOptimizer,
    StepDecay,
    nested_var_sa,
    sa_increment,
)
from src.riskquant.validation.twin import PValueErrorEstimate, TwinEstimate, es_error_proxy, pvalue_error_estimate

__all__ = [
    "convergence_slope",
    "crossing_rate",
    "normalized_rmse",
    "pair_key",
    "wasserstein_1d",
    "FunctionSampler",
    "GaussianNodeSampler",
    "NestedInit",
    "NestedMcConfig",
    "NestedResult",
    "SaOptimizer",
    "StepDecay",
    "nested_var_sa",
    "sa_increment",
    "PValueErrorEstimate",
    "TwinEstimate",
    "es_error_proxy",
    "pvalue_error_estimate",
]
