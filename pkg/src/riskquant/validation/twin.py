"""
Twin-simulation error estimates that need no ground truth.

With two responses drawn conditionally independently given the same X row, the
squared L2 distances below become plain expectations and are estimated by sample
means. Estimates are square roots of a mean clamped at zero; the 95% interval is
the normal interval of the mean, clamped and square-rooted the same way.
"""
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict

import numpy as np

from src.riskquant.core.losses import check_alpha
from src.riskquant.exceptions import InputError
from src.riskquant.models.dataset import Dataset

Predictor = Callable[[np.ndarray], np.ndarray]

Z_95 = 1.959963984540054


@dataclass
class TwinEstimate:
    point: float
    ci_halfwidth: float
    ci_low: float
    ci_high: float
    inner: float
    std_error: float
    n_used: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


PValueErrorEstimate = TwinEstimate


def _summarize(g: np.ndarray) -> TwinEstimate:
    n = g.size
    inner = float(np.mean(g))
    se = float(np.std(g, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    point = math.sqrt(max(inner, 0.0))
    low = math.sqrt(max(inner - Z_95 * se, 0.0))
    high = math.sqrt(max(inner + Z_95 * se, 0.0))
    return TwinEstimate(
        point=point,
        ci_halfwidth=max(point - low, high - point),
        ci_low=low,
        ci_high=high,
        inner=inner,
        std_error=se,
        n_used=n,
    )


def _require_twins(data: Dataset) -> None:
    if not data.has_twins:
        raise InputError("Twin-simulation estimates need a dataset with Y_twin")


def _evaluate(predictor: Predictor, data: Dataset, name: str) -> np.ndarray:
    values = np.asarray(predictor(data.X), dtype=np.float64).ravel()
    if values.shape[0] != len(data):
        raise InputError(f"{name} returned {values.shape[0]} values for {len(data)} rows")
    return values


def pvalue_error_estimate(q_hat: Predictor, data: Dataset, alpha: float) -> TwinEstimate:
    """
    Estimate || P[Y > q_hat(X) | X] - (1 - alpha) ||_2.

    Per row: (1-a)(1-a - 1{Y1>q} - 1{Y2>q}) + 1{Y1>q} 1{Y2>q}, whose conditional
    mean is the squared p-value distance.

    Raises:
        InputError: If the dataset carries no twin responses
    """
    _require_twins(data)
    a = float(check_alpha(alpha))
    q = _evaluate(q_hat, data, "q_hat")
    hit1 = (data.Y > q).astype(np.float64)
    hit2 = (data.Y_twin > q).astype(np.float64)
    g = (1.0 - a) * (1.0 - a - hit1 - hit2) + hit1 * hit2
    return _summarize(g)


def es_error_proxy(q_hat: Predictor, s_hat: Predictor, data: Dataset, alpha: float) -> TwinEstimate:
    """
    Estimate || s_hat - q_hat - (1-a)^-1 E[(Y - q_hat)^+ | X] ||_2.

    Per row with D = s_hat - q_hat and e_k = (Y_k - q_hat)^+:
    D^2 + (1-a)^-2 e_1 e_2 - (1-a)^-1 D (e_1 + e_2).

    Raises:
        InputError: If the dataset carries no twin responses
    """
    _require_twins(data)
    a = float(check_alpha(alpha))
    q = _evaluate(q_hat, data, "q_hat")
    s = _evaluate(s_hat, data, "s_hat")
    d = s - q
    e1 = np.maximum(data.Y - q, 0.0)
    e2 = np.maximum(data.Y_twin - q, 0.0)
    g = d * d + e1 * e2 / (1.0 - a) ** 2 - d * (e1 + e2) / (1.0 - a)
    return _summarize(g)
