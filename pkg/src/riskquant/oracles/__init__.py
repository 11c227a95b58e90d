"""
Ground-truth oracles: normal functions, the Gaussian toy model and the elicitability lab.
"""
from src.riskquant.oracles.elicitability import (
    DiscreteDist,
    UniformLaw,
    acerbi_es,
    brute_force_es_minimizer,
    brute_force_joint_minimizer,
    brute_force_quantile_minimizer,
    es_by_minimization,
    run_elicitability_checks,
)
from src.riskquant.oracles.gaussian_toy import (
    GaussianToySpec,
    toy_conditional_tail_mean,
    toy_exceedance_probability,
    toy_generate,
    toy_spec_sample,
    toy_var_es_closed,
)
from src.riskquant.oracles.normal import gaussian_var_es, norm_cdf, norm_funcs, norm_pdf, norm_ppf, norm_ppf_reference

__all__ = [
    "DiscreteDist",
    "UniformLaw",
    "acerbi_es",
    "brute_force_es_minimizer",
    "brute_force_joint_minimizer",
    "brute_force_quantile_minimizer",
    "es_by_minimization",
    "run_elicitability_checks",
    "GaussianToySpec",
    "toy_conditional_tail_mean",
    "toy_exceedance_probability",
    "toy_generate",
    "toy_spec_sample",
    "toy_var_es_closed",
    "gaussian_var_es",
    "norm_cdf",
    "norm_funcs",
    "norm_pdf",
    "norm_ppf",
    "norm_ppf_reference",
]
