"""
Accuracy metrics: normalized RMSE, quantile crossing rates, 1-D Wasserstein
distance and the empirical convergence slope.
"""
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np
from scipy import stats

from src.riskquant.exceptions import InputError, MetricError


def normalized_rmse(pred, truth) -> float:
    """sqrt(mean((pred - truth)^2)) / std(truth), population std."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape or t.size < 2:
        raise MetricError(f"normalized_rmse needs equal lengths >= 2, got {p.size} and {t.size}")
    sd = float(np.std(t))
    if not sd > 0:
        raise MetricError("Reference values have zero variance")
    return float(np.sqrt(np.mean((p - t) ** 2)) / sd)


def pair_key(alpha_hi: float, alpha_lo: float) -> str:
    return f"{alpha_hi:g}>{alpha_lo:g}"


def crossing_rate(
    model,
    X: np.ndarray,
    alpha_pairs: Iterable[Tuple[float, float]],
) -> Dict[str, float]:
    """
    Fraction of rows where the alpha_hi prediction is strictly below the alpha_lo one.

    Args:
        model: A multi-alpha model with ``predict(X, alpha)``, or a mapping from alpha
            to independently trained single-alpha models
        X: Feature rows
        alpha_pairs: (alpha_hi, alpha_lo) pairs with alpha_hi > alpha_lo

    Returns:
        Rates keyed "alpha_hi>alpha_lo"
    """
    rates: Dict[str, float] = {}
    for hi, lo in alpha_pairs:
        if not hi > lo:
            raise InputError(f"Crossing pair needs alpha_hi > alpha_lo, got ({hi}, {lo})")
        if isinstance(model, Mapping):
            q_hi = np.asarray(model[hi].predict(X, hi))
            q_lo = np.asarray(model[lo].predict(X, lo))
        else:
            q_hi = np.asarray(model.predict(X, hi))
            q_lo = np.asarray(model.predict(X, lo))
        rates[pair_key(hi, lo)] = float(np.mean(q_hi < q_lo))
    return rates


def wasserstein_1d(a, b) -> float:
    """W1 between two empirical laws; equal sizes use the sorted-sample mean."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise InputError("Wasserstein distance needs non-empty samples")
    if x.size == y.size:
        return float(np.mean(np.abs(np.sort(x) - np.sort(y))))
    return float(stats.wasserstein_distance(x, y))


def convergence_slope(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """OLS fit of log(rmse) on log(n); returns (slope, intercept)."""
    if len(points) < 2:
        raise InputError("Need at least two (n, rmse) points")
    arr = np.asarray(points, dtype=np.float64)
    if np.any(arr <= 0):
        raise InputError("Sample sizes and errors must be positive")
    slope, intercept = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)
    return float(slope), float(intercept)
