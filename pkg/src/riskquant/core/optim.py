"""
Adam optimizer, the seeded minibatch training loop, and the ridge least-squares
solve used to fit an output layer on frozen hidden features.
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field

from src.riskquant.core.nn_core import Network
from src.riskquant.exceptions import InputError, ShapeError, SolverError, TrainingError
from src.riskquant.models.dataset import Dataset
from src.riskquant.utils.logging import get_logger
from src.riskquant.utils.seeding import SeedStreams

logger = get_logger(__name__)

LossClosure = Callable[[Network, Dataset], Tuple[float, List[np.ndarray]]]


class TrainConfig(BaseModel):
    """Optimizer and minibatch settings for one fit."""

    epochs: int = Field(default=200, gt=0, description="Passes over the training set")
    batch_size: int = Field(default=1024, gt=0, description="Rows per Adam step")
    learning_rate: float = Field(default=0.01, gt=0, description="Adam step size")
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64, description="Seed of the init and shuffle streams")
    shuffle: bool = Field(default=True, description="Fresh permutation every epoch")

    model_config = {"frozen": True}


@dataclass
class AdamState:
    """First and second moment accumulators and the step counter."""
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], t=0)


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
    learning_rate: Optional[float] = None,
) -> Tuple[List[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update.

    ``learning_rate`` overrides ``cfg.learning_rate`` for this step only.

    Returns:
        New parameter arrays and the new state; inputs are left untouched.
    """
    if not len(params) == len(grads) == len(state.m):
        raise ShapeError("adam parameter lists", len(params), (len(grads), len(state.m)))
    t = state.t + 1
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeError("adam gradient", p.shape, g.shape)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        step = lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def train(
    net: Network,
    data: Dataset,
    loss_closure: LossClosure,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Network, List[float]]:
    """
    Minimize a mean loss with Adam over seeded, shuffled minibatches.

    Args:
        net: Initial network (left untouched)
        data: Training rows
        loss_closure: Maps (net, batch) to (mean batch loss, parameter gradients)
        cfg: Optimizer settings
        rng: Shuffle generator; defaults to the "shuffle" stream of ``cfg.seed``

    Returns:
        The trained network and the per-epoch mean loss history

    Raises:
        InputError: If the dataset is empty
        TrainingError: If a batch loss is not finite
    """
    n = len(data)
    if n == 0:
        raise InputError("Cannot train on an empty dataset")
    if rng is None:
        rng = SeedStreams(cfg.seed).rng("shuffle")

    state = AdamState.zeros_like(net.params)
    params = net.params
    n_batches = math.ceil(n / cfg.batch_size)
    history: List[float] = []
    step = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for b in range(n_batches):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            loss, grads = loss_closure(net, data.take(idx))
            if not np.isfinite(loss):
                raise TrainingError(epoch=epoch, step=step, loss=float(loss))
            params, state = adam_step(params, grads, state, cfg)
            net = net.with_params(params)
            total += float(loss) * len(idx)
            step += 1
        history.append(total / n)
        logger.debug("epoch_complete", epoch=epoch, mean_loss=history[-1])

    logger.info("training_complete", epochs=cfg.epochs, steps=step, first_loss=history[0], last_loss=history[-1])
    return net, history


def linear_least_squares(features: np.ndarray, targets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """
    Solve argmin_w |Phi w - t|^2 + ridge |w|^2 through the normal equations.

    Raises:
        SolverError: If the Gram matrix is not positive definite
    """
    phi = np.atleast_2d(np.asarray(features, dtype=np.float64))
    t = np.asarray(targets, dtype=np.float64).ravel()
    if phi.shape[0] != t.shape[0] or phi.shape[0] < 1:
        raise ShapeError("least squares rows", phi.shape[0], t.shape[0])
    if ridge < 0:
        raise InputError(f"ridge must be >= 0, got {ridge}")

    gram = phi.T @ phi + ridge * np.eye(phi.shape[1])
    rhs = phi.T @ t
    try:
        factor = scipy.linalg.cho_factor(gram, lower=False, check_finite=True)
        w = scipy.linalg.cho_solve(factor, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Normal equations are singular ({exc}); use ridge > 0") from exc
    if not np.all(np.isfinite(w)):
        raise SolverError("Least-squares solution is not finite; use ridge > 0")
    return w
