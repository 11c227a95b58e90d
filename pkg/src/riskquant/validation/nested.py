"""
Nested Monte Carlo benchmark: one stochastic-approximation VaR tracker per outer node.

Each node's estimate v is moved by gamma * (p - (1 - alpha)), where p is the
fraction of a fresh inner batch at or above v. Node randomness comes from a
counter-based generator keyed by the node, so the result for a node does not
depend on which other nodes are processed or in which order.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator

from src.riskquant.core.optim import AdamState, TrainConfig, adam_step
from src.riskquant.exceptions import InputError
from src.riskquant.oracles.normal import norm_ppf
from src.riskquant.utils.logging import get_logger
from src.riskquant.utils.seeding import counter_rng

logger = get_logger(__name__)


class SaOptimizer(str, Enum):
    PLAIN = "plain_sa"
    ADAM = "adam"


class StepDecay(str, Enum):
    NONE = "none"
    SQRT = "sqrt"


class NestedInit(str, Enum):
    GAUSSIAN_MOMENT = "gaussian_moment"
    ZERO = "zero"


class NestedMcConfig(BaseModel):
    """Settings of the per-node stochastic approximation."""

    n_inner: int = Field(default=1024, ge=1, description="Inner draws per iteration and node")
    K: int = Field(default=256, ge=1, description="Iterations per node")
    gamma: float = Field(default=1.0, gt=0, description="Step scale, in units of the node's inner std")
    alpha: float = Field(default=0.95, description="Confidence level")
    optimizer: SaOptimizer = Field(default=SaOptimizer.ADAM)
    step_decay: StepDecay = Field(default=StepDecay.NONE, description="'sqrt' uses gamma / sqrt(k + 1)")
    scale_by_std: bool = Field(default=True, description="Multiply the step by the first-batch std")
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = {"frozen": True}

    @field_validator("alpha")
    @classmethod
    def _alpha_open_unit(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("must lie in (0, 1)")
        return v


class InnerSampler(Protocol):
    """Conditional sampler over a fixed set of outer nodes."""

    @property
    def n_nodes(self) -> int: ...

    def node_key(self, i: int) -> int: ...

    def sample(self, i: int, rng: np.random.Generator, size: int) -> np.ndarray: ...


class GaussianNodeSampler:
    """Node i draws from N(means[i], stds[i]^2); used for checks with a known answer."""

    def __init__(self, means: Sequence[float], stds: Sequence[float], keys: Optional[Sequence[int]] = None):
        self.means = np.asarray(means, dtype=np.float64).ravel()
        self.stds = np.broadcast_to(np.asarray(stds, dtype=np.float64), self.means.shape).copy()
        self.keys = np.arange(self.means.size) if keys is None else np.asarray(keys, dtype=np.int64)
        if self.keys.shape != self.means.shape:
            raise InputError("One key per node is required")

    @property
    def n_nodes(self) -> int:
        return self.means.size

    def node_key(self, i: int) -> int:
        return int(self.keys[i])

    def sample(self, i: int, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.means[i] + self.stds[i] * rng.standard_normal(size)


class FunctionSampler:
    """Adapts ``fn(i, rng, size)`` to the sampler protocol."""

    def __init__(self, fn: Callable[[int, np.random.Generator, int], np.ndarray], n_nodes: int, keys=None):
        self._fn = fn
        self._n = int(n_nodes)
        self._keys = list(range(self._n)) if keys is None else [int(k) for k in keys]

    @property
    def n_nodes(self) -> int:
        return self._n

    def node_key(self, i: int) -> int:
        return self._keys[i]

    def sample(self, i: int, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self._fn(i, rng, size), dtype=np.float64)


@dataclass
class NestedResult:
    estimates: np.ndarray
    initial: np.ndarray
    inner_std: np.ndarray


def sa_increment(batch: np.ndarray, v: float, alpha: float) -> float:
    """p - (1 - alpha) with p the fraction of ``batch`` at or above ``v``."""
    return float(np.mean(np.asarray(batch) >= v)) - (1.0 - alpha)


def _run_node(sampler: InnerSampler, i: int, cfg: NestedMcConfig, init: NestedInit) -> tuple:
    rng = counter_rng(cfg.seed, sampler.node_key(i))
    batch = np.asarray(sampler.sample(i, rng, cfg.n_inner), dtype=np.float64)
    mean, std = float(batch.mean()), float(batch.std())
    v = mean + std * float(norm_ppf(cfg.alpha)) if init == NestedInit.GAUSSIAN_MOMENT else 0.0
    v0 = v

    scale = std if cfg.scale_by_std else 1.0
    if scale == 0.0 and init == NestedInit.ZERO:
        # a zero step would never leave the zero start
        scale = 1.0
    if scale == 0.0:
        return v0, v, std

    adam_state = AdamState.zeros_like([np.zeros(1)])
    adam_cfg = TrainConfig()
    for k in range(cfg.K):
        if k > 0:
            batch = sampler.sample(i, rng, cfg.n_inner)
        signal = sa_increment(batch, v, cfg.alpha)
        gamma = cfg.gamma / np.sqrt(k + 1.0) if cfg.step_decay == StepDecay.SQRT else cfg.gamma
        if cfg.optimizer == SaOptimizer.PLAIN:
            v += gamma * scale * signal
        else:
            lr = gamma * scale * (1.0 - cfg.alpha)
            new, adam_state = adam_step(
                [np.array([v])], [np.array([-signal])], adam_state, adam_cfg, learning_rate=lr
            )
            v = float(new[0][0])
    return v0, v, std


def nested_var_sa(
    sampler: InnerSampler,
    cfg: NestedMcConfig,
    init: NestedInit = NestedInit.GAUSSIAN_MOMENT,
) -> NestedResult:
    """
    Run K stochastic-approximation updates per node.

    Args:
        sampler: Conditional sampler with a stable key per node
        cfg: Inner batch size, iterations, step and optimizer settings
        init: Start from mean + std * Phi^-1(alpha) of the first batch, or from zero

    Returns:
        Per-node VaR estimates, initial values and first-batch standard deviations
    """
    n = sampler.n_nodes
    initial, estimates, stds = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        initial[i], estimates[i], stds[i] = _run_node(sampler, i, cfg, init)
    logger.info(
        "nested_sa_complete",
        nodes=n,
        n_inner=cfg.n_inner,
        iterations=cfg.K,
        optimizer=cfg.optimizer.value,
    )
    return NestedResult(estimates=estimates, initial=initial, inner_std=stds)
