"""
Dynamic initial margin case study on a one-factor surrogate market.
"""
from src.riskquant.dim.margin import (
    ImLabelSet,
    ImModelSet,
    NestedImBenchmark,
    benchmark_im_nested,
    coupon_steps,
    im_labels,
    im_profile,
    learn_im_backward,
    learned_im_paths,
    sawtooth_fraction,
)
from src.riskquant.dim.market import (
    MarketConfig,
    PathSet,
    SwapPortfolio,
    par_rate,
    portfolio_value,
    resimulate_increments,
    sample_portfolio,
    simulate_paths,
    vasicek_mean,
    zcb_price,
)

__all__ = [
    "ImLabelSet",
    "ImModelSet",
    "NestedImBenchmark",
    "benchmark_im_nested",
    "coupon_steps",
    "im_labels",
    "im_profile",
    "learn_im_backward",
    "learned_im_paths",
    "sawtooth_fraction",
    "MarketConfig",
    "PathSet",
    "SwapPortfolio",
    "par_rate",
    "portfolio_value",
    "resimulate_increments",
    "sample_portfolio",
    "simulate_paths",
    "vasicek_mean",
    "zcb_price",
]
