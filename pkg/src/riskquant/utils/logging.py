"""
Logging configuration for riskquant.
Uses structlog for structured logging with different renderers based on environment.
"""
import logging
import sys
from typing import Any, Dict, Optional

import structlog

from src.riskquant.config.settings import settings

_configured = False


def configure_logging(force: bool = False) -> None:
    """Configure logging for the package (idempotent unless forced)."""
    global _configured
    if _configured and not force:
        return

    log_level_str = settings.LOG_LEVEL.strip().upper()
    log_level = getattr(logging, log_level_str, logging.INFO)

    # stderr keeps stdout free for command output
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=log_level)

    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if settings.is_production:
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    structlog.configure(
        processors=processors,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        cache_logger_on_first_use=True,
    )
    _configured = True


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a structured logger with the given name."""
    configure_logging()
    return structlog.stdlib.get_logger(name)


def log_run_metrics(
    method: str,
    alpha: float,
    wall_ms: float,
    success: bool,
    error_type: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Log metrics about one fitted method in an experiment run.

    Args:
        method: Method tag (single, multi1, es_fullnet, ...)
        alpha: Confidence level the metrics refer to
        wall_ms: Wall time of the fit in milliseconds
        success: Whether the fit completed
        error_type: Type of error if not successful
        extra: Additional metrics to log
    """
    if not settings.ENABLE_METRICS:
        return

    logger = get_logger("riskquant.metrics")

    metrics: Dict[str, Any] = {
        "method": method,
        "alpha": alpha,
        "wall_ms": wall_ms,
        "success": success,
    }

    if error_type:
        metrics["error_type"] = error_type

    if extra:
        metrics.update(extra)

    logger.info("run_metrics", **metrics)
