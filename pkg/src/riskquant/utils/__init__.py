"""
Utilities package for riskquant: logging and seeding helpers.
"""

from src.riskquant.utils.logging import configure_logging, get_logger, log_run_metrics
from src.riskquant.utils.seeding import SeedStreams, counter_rng, derive_run_seed

__all__ = [
    "configure_logging",
    "get_logger",
    "log_run_metrics",
    "SeedStreams",
    "counter_rng",
    "derive_run_seed",
]
