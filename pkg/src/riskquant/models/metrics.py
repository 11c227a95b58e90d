"""
Metrics records written one per line to metrics.jsonl.
"""
import math
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

# Fields that depend on wall-clock time and stay out of metrics.jsonl
TIMING_FIELDS = ("wall_ms",)


class MetricsRecord(BaseModel):
    """Accuracy of one fitted method at one alpha in one run."""
    experiment: str = Field(..., description="Experiment kind that produced the record")
    run: int = Field(default=0, ge=0, description="Run index within the experiment")
    seed: int = Field(default=0, ge=0, description="Derived run seed")
    method: str = Field(..., description="Method tag (single, multi1, es_fullnet, ...)")
    alpha: Optional[float] = Field(default=None, description="Confidence level the metrics refer to")
    n: int = Field(default=0, ge=0, description="Training sample size")
    d: Optional[int] = Field(default=None, description="Feature dimension")
    rmse_norm: Optional[float] = None
    pvalue_err: Optional[float] = None
    pvalue_err_ci_hi: Optional[float] = None
    es_proxy: Optional[float] = None
    es_proxy_ci_hi: Optional[float] = None
    wasserstein: Optional[float] = None
    crossing: Dict[str, Optional[float]] = Field(default_factory=dict)
    extra: Dict[str, Optional[float]] = Field(default_factory=dict, description="Experiment-specific scalar metrics")
    wall_ms: float = Field(default=0.0, ge=0)

    def to_row(self) -> Dict[str, Any]:
        """JSON-safe dict without timing fields; non-finite floats become null."""
        row = self.model_dump(exclude=set(TIMING_FIELDS))
        return _finite_or_none(row)

    def metric_values(self) -> Dict[str, float]:
        """Flat finite scalar metrics for summaries; crossing entries are keyed crossing[hi>lo]."""
        values: Dict[str, float] = {}
        for key in ("rmse_norm", "pvalue_err", "es_proxy", "wasserstein"):
            value = getattr(self, key)
            if _finite(value):
                values[key] = float(value)
        for key, value in self.crossing.items():
            if _finite(value):
                values[f"crossing[{key}]"] = float(value)
        for key, value in self.extra.items():
            if _finite(value):
                values[key] = float(value)
        return values


def _finite(value) -> bool:
    return value is not None and math.isfinite(value)


def _finite_or_none(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    return value
