"""
Loss functions for quantile (VaR) and expected shortfall regression.

All functions are vectorized: scalars or arrays broadcast against each other,
and each returns the loss together with the partial derivatives the trainers need.
At the pinball kink y == v the y <= v branch is used for the subgradient.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.riskquant.exceptions import DomainError, InputError

TruncationBound = Optional[float]


def check_alpha(alpha, name: str = "alpha") -> np.ndarray:
    """Validate confidence level(s) strictly inside (0, 1)."""
    a = np.asarray(alpha, dtype=np.float64)
    if not np.all((a > 0.0) & (a < 1.0)):
        bad = a[~((a > 0.0) & (a < 1.0))] if a.ndim else a
        raise DomainError(name, float(np.ravel(bad)[0]), "(0, 1)")
    return a


def check_bound(bound: TruncationBound) -> TruncationBound:
    if bound is not None and not bound > 0:
        raise InputError(f"Truncation bound must be > 0 or None, got {bound}")
    return bound


def truncate(t, bound: TruncationBound):
    """T_B: clamp to [-B, B]; identity when B is None."""
    if bound is None:
        return t
    return np.clip(t, -bound, bound)


class H2Kind(str, Enum):
    """Choice of the strictly decreasing, strictly convex h2 in the joint loss."""
    EXP_NEG = "exp_neg"


@dataclass(frozen=True)
class JointLossSpec:
    h2_kind: H2Kind = H2Kind.EXP_NEG

    def h2(self, z):
        """Return h2(z), h2'(z), h2''(z)."""
        e = np.exp(-np.asarray(z, dtype=np.float64))
        return e, -e, e


def pinball_loss(y, v, alpha) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tilted loss (1-alpha)^-1 (y-v)^+ + v, minimized in expectation by the alpha-quantile.

    Returns:
        (loss, d loss / d v)
    """
    a = check_alpha(alpha)
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    excess = y - v
    above = excess > 0
    loss = np.where(above, excess, 0.0) / (1.0 - a) + v
    dv = 1.0 - above / (1.0 - a)
    return loss, dv


def es_increment_target(y, v_hat, alpha, bound: TruncationBound = None) -> np.ndarray:
    """Regression target T_B((1-alpha)^-1 (y - v_hat)^+) whose conditional mean is ES - VaR."""
    a = check_alpha(alpha)
    excess = np.maximum(np.asarray(y, dtype=np.float64) - np.asarray(v_hat, dtype=np.float64), 0.0)
    return truncate(excess / (1.0 - a), check_bound(bound))


def es_square_loss(y, v_hat, z, alpha, bound: TruncationBound = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Second-step squared residual (z - t)^2 with t the truncated increment target.

    Returns:
        (loss, d loss / d z)
    """
    t = es_increment_target(y, v_hat, alpha, bound)
    r = np.asarray(z, dtype=np.float64) - t
    return r * r, 2.0 * r


def joint_loss(y, v, z, alpha, spec: JointLossSpec = JointLossSpec()) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Joint (VaR, ES) scoring loss with h1 = identity:

        (1-a)^-1 (y-v)^+ + v + h2'(z) (z - v - (1-a)^-1 (y-v)^+) - h2(z)

    Returns:
        (loss, d/dv, d/dz)
    """
    a = check_alpha(alpha)
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    h, h_p, h_pp = spec.h2(z)

    excess = y - v
    above = excess > 0
    tail = np.where(above, excess, 0.0) / (1.0 - a)
    gap = z - v - tail

    loss = tail + v + h_p * gap - h
    slope = 1.0 - above / (1.0 - a)
    dv = slope * (1.0 - h_p)
    dz = h_pp * gap
    return loss, dv, dz


def crossing_penalty(dq_dalpha, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Penalty lam * (-dq/dalpha)^+ on decreasing quantile curves.

    Returns:
        (penalty, d penalty / d tangent)
    """
    if lam < 0:
        raise InputError(f"Crossing penalty weight must be >= 0, got {lam}")
    t = np.asarray(dq_dalpha, dtype=np.float64)
    negative = t < 0
    penalty = lam * np.where(negative, -t, 0.0)
    return penalty, np.where(negative, -lam, 0.0)
