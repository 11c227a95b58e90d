"""
Initial margin: path-wise labels, backward-in-time learning with warm starts, the
nested Monte Carlo benchmark and profile statistics.

IM_t = VaR_alpha(MtM_{t+delta} - MtM_t | X_t), learned one model per grid step.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.riskquant.core.nn_core import InterpGrid
from src.riskquant.core.optim import TrainConfig
from src.riskquant.dim.market import MarketConfig, PathSet, SwapPortfolio, resimulate_increments, simulate_paths
from src.riskquant.exceptions import InputError
from src.riskquant.models.dataset import Dataset
from src.riskquant.trainers.fitting import fit_var
from src.riskquant.trainers.models import ArchitectureConfig, VarModel
from src.riskquant.trainers.transforms import AffineTransform
from src.riskquant.utils.logging import get_logger
from src.riskquant.validation.nested import FunctionSampler, NestedInit, NestedMcConfig, NestedResult, nested_var_sa

logger = get_logger(__name__)


@dataclass(eq=False)
class ImLabelSet:
    """Features X_t and responses MtM_{t+delta} - MtM_t for every path and kept step."""
    steps: np.ndarray
    times: np.ndarray
    features: np.ndarray  # (paths, steps, state_dim)
    responses: np.ndarray  # (paths, steps)
    delta_steps: int

    @property
    def n_steps(self) -> int:
        return self.steps.shape[0]

    def step_dataset(self, j: int) -> Dataset:
        """Training rows of the j-th kept step."""
        return Dataset(X=self.features[:, j, :], Y=self.responses[:, j])


def im_labels(paths: PathSet, delta_steps: Optional[int] = None) -> ImLabelSet:
    """
    One response per (path, step) with t + delta on the grid; no discounting inside the window.

    Raises:
        InputError: If delta does not fit on the grid
    """
    m = paths.delta_steps if delta_steps is None else int(delta_steps)
    last = paths.times.shape[0] - 1
    if m < 1 or m > last:
        raise InputError(f"delta of {m} steps does not fit a grid of {last} steps")
    steps = np.arange(0, last - m + 1)
    responses = paths.mtm[:, steps + m] - paths.mtm[:, steps]
    if not np.all(np.isfinite(responses)):
        raise InputError("Non-finite MtM increments in path set")
    return ImLabelSet(
        steps=steps,
        times=paths.times[steps],
        features=paths.states[:, steps, :],
        responses=responses,
        delta_steps=m,
    )


@dataclass(eq=False)
class ImModelSet:
    """Per-step IM models in forward time order."""
    models: List[VarModel]
    times: np.ndarray
    final_losses: List[float] = field(default_factory=list)

    def predict(self, j: int, X, alpha) -> np.ndarray:
        return np.asarray(self.models[j].predict(X, alpha))


def learn_im_backward(
    labels: ImLabelSet,
    alphas: Sequence[float] = (0.95,),
    method: str = "single",
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    warm_start: bool = True,
    lam: float = 1.0,
    alpha_range: Optional[Tuple[float, float]] = None,
    grid: Optional[InterpGrid] = None,
) -> ImModelSet:
    """
    Train the last step first; each earlier step starts from the next step's weights.

    Responses are standardized per step, so a warm start hands over shape rather
    than level.

    Raises:
        InputError: If the label set has no steps
    """
    if labels.n_steps == 0:
        raise InputError("Label set has no steps to learn")
    cfg = cfg or TrainConfig(epochs=16, learning_rate=0.001)
    models: List[Optional[VarModel]] = [None] * labels.n_steps
    previous: Optional[VarModel] = None
    for j in reversed(range(labels.n_steps)):
        data = labels.step_dataset(j)
        model = fit_var(
            method,
            data,
            list(alphas),
            arch=arch,
            cfg=cfg,
            lam=lam,
            alpha_range=alpha_range,
            grid=grid,
            transform=AffineTransform.standardizing(data.Y),
            init_net=previous.net if (warm_start and previous is not None) else None,
        )
        models[j] = model
        previous = model
        logger.debug("im_step_fitted", step=int(labels.steps[j]), final_loss=model.history[-1])
    logger.info("im_backward_complete", steps=labels.n_steps, warm_start=warm_start, method=method)
    return ImModelSet(models=models, times=labels.times, final_losses=[m.history[-1] for m in models])


@dataclass(eq=False)
class NestedImBenchmark:
    step: int
    states: np.ndarray
    im: np.ndarray
    result: NestedResult


def benchmark_im_nested(
    cfg: MarketConfig,
    n_outer: int,
    nested_cfg: NestedMcConfig,
    step: int,
    portfolio: SwapPortfolio,
    path_offset: int = 0,
    init: NestedInit = NestedInit.GAUSSIAN_MOMENT,
) -> NestedImBenchmark:
    """
    IM at grid index ``step`` for ``n_outer`` outer states, one SA tracker per state.

    Outer states come from ``simulate_paths`` with ``path_offset``; node keys are the
    path indices, so a node's benchmark is reproducible on its own.
    """
    if not 0 <= step <= cfg.steps - cfg.delta_steps:
        raise InputError(f"step {step} has no full margin window on the grid")
    outer = simulate_paths(cfg, n_outer, portfolio=portfolio, path_offset=path_offset, until_step=step)
    states = outer.states[:, step, :]

    def draw(i: int, rng: np.random.Generator, size: int) -> np.ndarray:
        return resimulate_increments(portfolio, cfg, states[i, 0], states[i, 2], step, rng, size)

    sampler = FunctionSampler(draw, n_outer, keys=path_offset + np.arange(n_outer))
    result = nested_var_sa(sampler, nested_cfg, init=init)
    return NestedImBenchmark(step=step, states=states, im=result.estimates, result=result)


def coupon_steps(times: np.ndarray, delta_steps: int) -> List[int]:
    """Indices k whose margin window (t_k, t_{k+delta}] contains a coupon date."""
    out: List[int] = []
    for k in range(times.shape[0] - delta_steps):
        lo, hi = times[k], times[k + delta_steps]
        if np.floor(hi + 1e-9) > np.floor(lo + 1e-9) and np.floor(hi + 1e-9) >= 1:
            out.append(k)
    return out


def sawtooth_fraction(im_mean: np.ndarray, steps: Sequence[int]) -> float:
    """Share of coupon steps k where the mean IM at k + 1 is below the one at k."""
    usable = [k for k in steps if k + 1 < im_mean.shape[0]]
    if not usable:
        return float("nan")
    return float(np.mean([im_mean[k + 1] < im_mean[k] for k in usable]))


def learned_im_paths(models: ImModelSet, labels: ImLabelSet, alpha: float) -> np.ndarray:
    """Learned IM evaluated along every labelled path, shape (paths, steps)."""
    cols = [models.predict(j, labels.features[:, j, :], alpha) for j in range(labels.n_steps)]
    return np.column_stack(cols)


def im_profile(im_paths: np.ndarray, times: np.ndarray) -> pd.DataFrame:
    """Mean and 5% / 95% percentiles of IM over paths, per time."""
    return pd.DataFrame({
        "time": times,
        "mean": im_paths.mean(axis=0),
        "p05": np.percentile(im_paths, 5, axis=0),
        "p95": np.percentile(im_paths, 95, axis=0),
    })
