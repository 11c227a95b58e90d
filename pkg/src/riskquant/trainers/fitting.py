"""
Learning schemes for conditional VaR and ES.

Every fit standardizes features (unless told otherwise), optionally maps the
response through a monotone transform, and trains a Softplus MLP with the seeded
Adam loop. Fits are deterministic given (data, alpha, architecture, TrainConfig).
"""
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from src.riskquant.core.losses import (
    JointLossSpec,
    TruncationBound,
    check_alpha,
    check_bound,
    crossing_penalty,
    es_increment_target,
    es_square_loss,
    joint_loss,
    pinball_loss,
)
from src.riskquant.core.nn_core import (
    Activation,
    InterpGrid,
    LayerSpec,
    Network,
    backward,
    forward,
    forward_with_alpha_tangent,
    interp_weights,
)
from src.riskquant.core.optim import TrainConfig, linear_least_squares, train
from src.riskquant.exceptions import InputError, ShapeError
from src.riskquant.models.dataset import Dataset
from src.riskquant.trainers.models import (
    AlphaFeatureMap,
    AlphaMode,
    ArchitectureConfig,
    EsInput,
    EsModel,
    QuantileFn,
    VarModel,
)
from src.riskquant.trainers.transforms import IDENTITY, AffineTransform, FeatureScaler, ResponseTransform
from src.riskquant.utils.logging import get_logger
from src.riskquant.utils.seeding import SeedStreams

logger = get_logger(__name__)

DEFAULT_RIDGE = 1e-10


class EsFitMode(str, Enum):
    FULL_NET = "full_net"
    FROZEN_LR = "frozen_lr"


def upper_tail_grid(size: int = 21, first: float = 1e-3, last: float = 0.15) -> InterpGrid:
    """Knots 1 - (first + k (last - first) / (size - 1)), sorted increasingly."""
    if size < 2:
        raise InputError(f"Grid size must be >= 2, got {size}")
    tails = first + np.arange(size) * (last - first) / (size - 1)
    return InterpGrid(tuple(np.sort(1.0 - tails).tolist()))


def _defaults(arch: Optional[ArchitectureConfig], cfg: Optional[TrainConfig]):
    return arch or ArchitectureConfig(), cfg or TrainConfig()


def _scaler(data: Dataset, standardize: bool) -> FeatureScaler:
    return FeatureScaler.fit(data.X) if standardize else FeatureScaler.identity(data.dim)


def _initial_net(
    arch: ArchitectureConfig,
    cfg: TrainConfig,
    input_dim: int,
    output_dim: int,
    init_net: Optional[Network],
) -> Network:
    if init_net is None:
        return arch.build(input_dim, output_dim, SeedStreams(cfg.seed).rng("init"))
    if init_net.input_dim != input_dim or init_net.output_dim != output_dim:
        raise ShapeError("warm-start network", (input_dim, output_dim), (init_net.input_dim, init_net.output_dim))
    return init_net


def _alpha_draws(data: Dataset, low: float, high: float, cfg: TrainConfig) -> np.ndarray:
    """Per-row alpha: the dataset's column, or one uniform draw per row from the alpha stream."""
    if data.alpha_col is not None:
        a = data.alpha_col
        if np.any(a < low) or np.any(a > high):
            raise InputError(f"alpha_col values must lie in [{low}, {high}]")
        return a
    return SeedStreams(cfg.seed).rng("alpha").uniform(low, high, size=len(data))


def alpha_crossing_penalty(tangent: np.ndarray, alphas: np.ndarray, alpha_map: AlphaFeatureMap, lam: float):
    """
    Crossing penalty on dq/dalpha from the tangent along the network's alpha feature.

    Returns the per-row penalty and its derivative with respect to that tangent.
    """
    scale = alpha_map.derivative(alphas)
    penalty, d_pen = crossing_penalty(tangent * scale, lam)
    return penalty, d_pen * scale


def _pinball_closure(alpha):
    def closure(net: Network, batch: Dataset):
        out, cache = forward(net, batch.X)
        loss, dv = pinball_loss(batch.Y, out[:, 0], alpha)
        n = len(batch)
        grads = backward(net, cache, (dv / n)[:, None])
        return float(np.mean(loss)), grads.params
    return closure


def fit_var_single(
    data: Dataset,
    alpha: float,
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    transform: ResponseTransform = IDENTITY,
    standardize: bool = True,
    init_net: Optional[Network] = None,
) -> VarModel:
    """
    Fit VaR at one confidence level by minimizing the mean pinball loss.

    Args:
        data: Training rows
        alpha: Confidence level
        arch: Network shape (3 hidden layers of width 2d by default)
        cfg: Optimizer settings
        transform: Increasing map applied to Y before training and inverted at prediction
        standardize: Scale features to zero mean and unit variance
        init_net: Warm-start network with matching shape

    Returns:
        A SINGLE-mode VarModel
    """
    a = float(check_alpha(alpha))
    arch, cfg = _defaults(arch, cfg)
    scaler = _scaler(data, standardize)
    train_set = Dataset(X=scaler.apply(data.X), Y=transform.forward(data.Y))
    net = _initial_net(arch, cfg, data.dim, 1, init_net)
    net, history = train(net, train_set, _pinball_closure(a), cfg)
    logger.info("var_single_fitted", alpha=a, n=len(data), final_loss=history[-1])
    return VarModel(AlphaMode.SINGLE, net, alpha=a, transform=transform, scaler=scaler, history=history)


def fit_var_multi_continuum(
    data: Dataset,
    alpha_range: Tuple[float, float],
    lam: float = 1.0,
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    transform: ResponseTransform = IDENTITY,
    standardize: bool = True,
    init_net: Optional[Network] = None,
) -> VarModel:
    """
    Fit one network q(alpha, x) over a continuum of levels with randomized alpha.

    The alpha feature enters as input coordinate 0; ``lam`` > 0 adds the penalty
    lam * (-dq/dalpha)^+, with dq/dalpha taken from the forward tangent and
    chained through the alpha feature map, in the training response's scale.
    ``lam`` = 0 trains without it.

    Raises:
        InputError: If the range is not inside (0, 1) or not increasing
    """
    low, high = (float(v) for v in alpha_range)
    if not 0.0 < low < high < 1.0:
        raise InputError(f"alpha_range must satisfy 0 < low < high < 1, got ({low}, {high})")
    if lam < 0:
        raise InputError(f"Crossing penalty weight must be >= 0, got {lam}")
    arch, cfg = _defaults(arch, cfg)

    scaler = _scaler(data, standardize)
    alphas = _alpha_draws(data, low, high, cfg)
    alpha_map = AlphaFeatureMap(low, high)
    inputs = np.column_stack([alpha_map(alphas), scaler.apply(data.X)])
    train_set = Dataset(X=inputs, Y=transform.forward(data.Y), alpha_col=alphas)

    def closure(net: Network, batch: Dataset):
        out, tangent, cache = forward_with_alpha_tangent(net, batch.X, return_cache=True)
        loss, dv = pinball_loss(batch.Y, out[:, 0], batch.alpha_col)
        penalty, d_pen = alpha_crossing_penalty(tangent[:, 0], batch.alpha_col, alpha_map, lam)
        n = len(batch)
        grads = backward(net, cache, (dv / n)[:, None], d_tangent=(d_pen / n)[:, None])
        return float(np.mean(loss + penalty)), grads.params

    net = _initial_net(arch, cfg, data.dim + 1, 1, init_net)
    net, history = train(net, train_set, closure, cfg)
    logger.info("var_continuum_fitted", alpha_range=(low, high), lam=lam, n=len(data), final_loss=history[-1])
    return VarModel(
        AlphaMode.CONTINUUM,
        net,
        alpha_range=(low, high),
        transform=transform,
        scaler=scaler,
        history=history,
    )


def fit_var_multi_interp(
    data: Dataset,
    grid: InterpGrid,
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    transform: ResponseTransform = IDENTITY,
    standardize: bool = True,
    init_net: Optional[Network] = None,
) -> VarModel:
    """
    Fit a K-output network read through the piecewise-linear interpolation head.

    Output 0 is the quantile at the first knot and output j the slope on the j-th
    segment. Slopes are not constrained to be positive.
    """
    arch, cfg = _defaults(arch, cfg)
    scaler = _scaler(data, standardize)
    alphas = _alpha_draws(data, grid.low, grid.high, cfg)
    train_set = Dataset(X=scaler.apply(data.X), Y=transform.forward(data.Y), alpha_col=alphas)

    def closure(net: Network, batch: Dataset):
        out, cache = forward(net, batch.X)
        coeffs = interp_weights(batch.alpha_col, grid)
        value = np.sum(out * coeffs, axis=1)
        loss, dv = pinball_loss(batch.Y, value, batch.alpha_col)
        grads = backward(net, cache, dv[:, None] * coeffs / len(batch))
        return float(np.mean(loss)), grads.params

    net = _initial_net(arch, cfg, data.dim, grid.size, init_net)
    net, history = train(net, train_set, closure, cfg)
    logger.info("var_interp_fitted", knots=grid.size, n=len(data), final_loss=history[-1])
    return VarModel(AlphaMode.INTERP, net, grid=grid, transform=transform, scaler=scaler, history=history)


def _candidate_quantile(var_model: Union[VarModel, QuantileFn], X: np.ndarray, alpha: float) -> np.ndarray:
    if isinstance(var_model, VarModel):
        var_model.require(alpha)
        return np.asarray(var_model.predict(X, alpha), dtype=np.float64)
    q = np.asarray(var_model(X), dtype=np.float64).ravel()
    if q.shape[0] != X.shape[0]:
        raise ShapeError("candidate quantile values", X.shape[0], q.shape[0])
    return q


def _output_head(net: Network, row: int, weights: Optional[np.ndarray] = None, bias: Optional[float] = None) -> Network:
    """The hidden stack of ``net`` topped with a single-output identity layer."""
    hidden = net.n_hidden
    width = net.specs[-1].in_dim
    w = net.weights[-1][row:row + 1] if weights is None else np.asarray(weights, dtype=np.float64).reshape(1, width)
    b = net.biases[-1][row:row + 1] if bias is None else np.array([bias])
    specs = list(net.specs[:hidden]) + [LayerSpec(width, 1, Activation.IDENTITY)]
    return Network(specs, list(net.weights[:hidden]) + [w], list(net.biases[:hidden]) + [b])


def fit_es_two_step(
    data: Dataset,
    var_model: Union[VarModel, QuantileFn],
    alpha: float,
    mode: EsFitMode = EsFitMode.FULL_NET,
    trunc: TruncationBound = None,
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    standardize: bool = True,
    ridge: float = DEFAULT_RIDGE,
    init_net: Optional[Network] = None,
) -> EsModel:
    """
    Second step: regress the increment (1-a)^-1 (Y - q(X))^+ on X.

    FULL_NET trains a fresh network on the squared residual. FROZEN_LR keeps the
    candidate VaR network's hidden layers fixed and solves for a new output layer
    by ridge least squares on [hidden features, 1].

    Args:
        data: Training rows
        var_model: Fitted VarModel covering ``alpha``, or a callable X -> VaR
        alpha: Confidence level
        mode: FULL_NET or FROZEN_LR
        trunc: Optional bound B clamping the increment targets to [-B, B]
        arch: Network shape for FULL_NET
        cfg: Optimizer settings for FULL_NET
        standardize: Scale features for FULL_NET
        ridge: Ridge weight of the FROZEN_LR solve
        init_net: Warm-start increment network for FULL_NET

    Raises:
        UsageError: If ``var_model`` does not cover ``alpha``
        InputError: If FROZEN_LR is asked of a candidate without hidden layers
    """
    a = float(check_alpha(alpha))
    check_bound(trunc)
    mode = EsFitMode(mode)
    q = _candidate_quantile(var_model, data.X, a)
    targets = es_increment_target(data.Y, q, a, trunc)

    if mode == EsFitMode.FROZEN_LR:
        if not isinstance(var_model, VarModel) or var_model.net.n_hidden < 1:
            raise InputError("FROZEN_LR needs a fitted VarModel network with at least one hidden layer")
        inputs = var_model.net_inputs(data.X, a)
        feats = var_model.net.hidden_features(inputs)
        phi = np.column_stack([feats, np.ones(feats.shape[0])])
        w = linear_least_squares(phi, targets, ridge=ridge)
        head = _output_head(var_model.net, 0, weights=w[:-1], bias=float(w[-1]))
        logger.info("es_frozen_lr_fitted", alpha=a, n=len(data), features=phi.shape[1])
        return EsModel(
            var_model=var_model,
            alpha=a,
            increment_net=head,
            input_kind=EsInput.VAR_INPUTS,
            trunc=trunc,
            method="es_frozenlr",
        )

    arch, cfg = _defaults(arch, cfg)
    scaler = _scaler(data, standardize)
    scale = AffineTransform.standardizing(targets)
    # the candidate quantile rides along as the last column so shuffled batches stay aligned
    train_set = Dataset(X=np.column_stack([scaler.apply(data.X), q]), Y=data.Y)

    def closure(net: Network, batch: Dataset):
        out, cache = forward(net, batch.X[:, :-1])
        z = scale.inverse(out[:, 0])
        loss, dz = es_square_loss(batch.Y, batch.X[:, -1], z, a, trunc)
        grads = backward(net, cache, (dz * scale.scale / len(batch))[:, None])
        return float(np.mean(loss)), grads.params

    net = _initial_net(arch, cfg, data.dim, 1, init_net)
    net, history = train(net, train_set, closure, cfg)
    logger.info("es_full_net_fitted", alpha=a, n=len(data), final_loss=history[-1])
    return EsModel(
        var_model=var_model,
        alpha=a,
        increment_net=net,
        input_kind=EsInput.FEATURES,
        trunc=trunc,
        transform=scale,
        scaler=scaler,
        method="es_fullnet",
        history=history,
    )


def fit_joint(
    data: Dataset,
    alpha: float,
    spec: JointLossSpec = JointLossSpec(),
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    transform: AffineTransform = IDENTITY,
    standardize: bool = True,
) -> Tuple[VarModel, EsModel]:
    """
    Learn VaR and ES together with one two-output network and the joint loss.

    Output 0 is v (VaR) and output 1 the increment g, wired as z = v + g. Only affine
    response transforms are allowed since ES does not commute with other maps.

    Returns:
        (VarModel, EsModel) sharing the hidden layers of the trained network
    """
    a = float(check_alpha(alpha))
    if not isinstance(transform, AffineTransform):
        raise InputError("Joint learning supports affine response transforms only")
    arch, cfg = _defaults(arch, cfg)
    scaler = _scaler(data, standardize)
    train_set = Dataset(X=scaler.apply(data.X), Y=transform.forward(data.Y))

    def closure(net: Network, batch: Dataset):
        out, cache = forward(net, batch.X)
        v, g = out[:, 0], out[:, 1]
        loss, dv, dz = joint_loss(batch.Y, v, v + g, a, spec)
        d_out = np.column_stack([dv + dz, dz]) / len(batch)
        grads = backward(net, cache, d_out)
        return float(np.mean(loss)), grads.params

    net = _initial_net(arch, cfg, data.dim, 2, None)
    net, history = train(net, train_set, closure, cfg)
    logger.info("joint_fitted", alpha=a, n=len(data), final_loss=history[-1])

    if net.n_hidden >= 1:
        var_net, inc_net = _output_head(net, 0), _output_head(net, 1)
    else:
        var_net = Network([LayerSpec(net.input_dim, 1, Activation.IDENTITY)], [net.weights[0][0:1]], [net.biases[0][0:1]])
        inc_net = Network([LayerSpec(net.input_dim, 1, Activation.IDENTITY)], [net.weights[0][1:2]], [net.biases[0][1:2]])
    var_model = VarModel(AlphaMode.SINGLE, var_net, alpha=a, transform=transform, scaler=scaler, history=history)
    es_model = EsModel(
        var_model=var_model,
        alpha=a,
        increment_net=inc_net,
        input_kind=EsInput.VAR_INPUTS,
        transform=AffineTransform(0.0, transform.scale),
        method="joint",
        history=history,
    )
    return var_model, es_model


def fit_var(
    method: str,
    data: Dataset,
    alphas: List[float],
    arch: Optional[ArchitectureConfig] = None,
    cfg: Optional[TrainConfig] = None,
    lam: float = 1.0,
    alpha_range: Optional[Tuple[float, float]] = None,
    grid: Optional[InterpGrid] = None,
    transform: ResponseTransform = IDENTITY,
    init_net: Optional[Network] = None,
) -> VarModel:
    """
    Dispatch on a method tag: single, multi1 (continuum with penalty), multi2
    (continuum without) or multi3 (interpolation grid).
    """
    if method == "single":
        if len(alphas) != 1:
            raise InputError("Method 'single' fits exactly one alpha")
        return fit_var_single(data, alphas[0], arch, cfg, transform=transform, init_net=init_net)
    if method in ("multi1", "multi2"):
        span = alpha_range or (min(alphas), max(alphas))
        weight = lam if method == "multi1" else 0.0
        return fit_var_multi_continuum(data, span, weight, arch, cfg, transform=transform, init_net=init_net)
    if method == "multi3":
        return fit_var_multi_interp(data, grid or upper_tail_grid(), arch, cfg, transform=transform, init_net=init_net)
    raise InputError(f"Unknown VaR method '{method}'")

