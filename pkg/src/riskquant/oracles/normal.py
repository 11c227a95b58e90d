"""
Standard normal CDF, density and quantile.

The fast path uses scipy.special; ``norm_ppf_reference`` inverts the erfc-based
CDF by bracketed root finding and is what the fast path is checked against.
"""
import math
from typing import Tuple

import numpy as np
from scipy import optimize, special

from src.riskquant.exceptions import DomainError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _check_prob(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    ok = (arr > 0.0) & (arr < 1.0)
    if not np.all(ok):
        raise DomainError("p", float(np.ravel(arr[~ok] if arr.ndim else arr)[0]), "(0, 1)")
    return arr


def norm_cdf(x):
    """Phi(x)."""
    return special.ndtr(np.asarray(x, dtype=np.float64))


def norm_pdf(x):
    """phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def norm_ppf(p):
    """Phi^-1(p) for p in (0, 1)."""
    return special.ndtri(_check_prob(p))


def norm_ppf_reference(p: float, xtol: float = 1e-14) -> float:
    """Quantile by root finding on Phi(x) = 0.5 erfc(-x / sqrt 2); slow but independent of ndtri."""
    p = float(_check_prob(p))

    def gap(x: float) -> float:
        return 0.5 * math.erfc(-x / math.sqrt(2.0)) - p

    return optimize.brentq(gap, -40.0, 40.0, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def norm_funcs(p: float, x: float) -> Tuple[float, float, float]:
    """Return (Phi^-1(p), Phi(x), phi(x)) in one call."""
    return float(norm_ppf(p)), float(norm_cdf(x)), float(norm_pdf(x))


def gaussian_var_es(mean, std, alpha) -> Tuple[np.ndarray, np.ndarray]:
    """Upper-tail VaR and ES of N(mean, std^2): mean + std * (Phi^-1(a), phi(Phi^-1(a)) / (1 - a))."""
    u = norm_ppf(alpha)
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    return mean + std * u, mean + std * norm_pdf(u) / (1.0 - np.asarray(alpha, dtype=np.float64))
