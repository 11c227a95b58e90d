"""
Feedforward Softplus networks with the two differentiation modes training needs:
reverse mode over the parameters and a forward-mode tangent along the alpha input.

Arrays are float64 and batch-first: an input batch has shape (n, in_dim).
A 1-D input is treated as a single row and the outputs are returned 1-D.
"""
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.riskquant.exceptions import DomainError, InputError, ShapeError

ArrayLike = Union[np.ndarray, Sequence[float], float]


class Activation(str, Enum):
    """Layer activations."""
    SOFTPLUS = "softplus"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one affine layer."""
    in_dim: int
    out_dim: int
    activation: Activation = Activation.SOFTPLUS

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise InputError(f"Layer dimensions must be positive, got {self.in_dim}->{self.out_dim}")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass(frozen=True)
class InterpGrid:
    """Knots of the piecewise-linear interpolation head."""
    knots: Tuple[float, ...]

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        if len(knots) < 2:
            raise InputError(f"InterpGrid needs at least 2 knots, got {len(knots)}")
        if any(not 0.0 < k < 1.0 for k in knots):
            raise DomainError("knots", knots, "(0, 1)")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise InputError(f"InterpGrid knots must be strictly increasing: {knots}")
        object.__setattr__(self, "knots", knots)

    @property
    def size(self) -> int:
        return len(self.knots)

    @property
    def low(self) -> float:
        return self.knots[0]

    @property
    def high(self) -> float:
        return self.knots[-1]

    @classmethod
    def uniform(cls, low: float, high: float, size: int) -> "InterpGrid":
        return cls(tuple(np.linspace(low, high, size).tolist()))


def softplus(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise softplus value and derivative (the logistic sigmoid), overflow-stable."""
    x = np.asarray(x, dtype=np.float64)
    value = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    e = np.exp(-np.abs(x))
    derivative = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return value, derivative


def softplus_eval(x: float) -> Tuple[float, float]:
    """Softplus value and derivative at a single finite real."""
    value, derivative = softplus(np.float64(x))
    return float(value), float(derivative)


def glorot_uniform(rng: np.random.Generator, in_dim: int, out_dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


class Network:
    """
    An immutable feedforward network: Softplus hidden layers, identity output layer.

    Parameters are exposed as a flat list ``[W1, b1, W2, b2, ...]`` so optimizers
    can treat every network alike; weight matrices are (out_dim, in_dim).
    """

    def __init__(self, specs: Sequence[LayerSpec], weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        if not specs:
            raise InputError("A network needs at least one layer")
        if not len(specs) == len(weights) == len(biases):
            raise ShapeError("layer lists", len(specs), (len(weights), len(biases)))
        for prev, nxt in zip(specs, specs[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError("layer chain", prev.out_dim, nxt.in_dim)
        if specs[-1].activation != Activation.IDENTITY:
            raise InputError("The output layer must use the identity activation")

        frozen_w, frozen_b = [], []
        for spec, w, b in zip(specs, weights, biases):
            w, b = _frozen(w), _frozen(b)
            if w.shape != (spec.out_dim, spec.in_dim):
                raise ShapeError("weight", (spec.out_dim, spec.in_dim), w.shape)
            if b.shape != (spec.out_dim,):
                raise ShapeError("bias", (spec.out_dim,), b.shape)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InputError("Network parameters must be finite")
            frozen_w.append(w)
            frozen_b.append(b)

        self.specs: Tuple[LayerSpec, ...] = tuple(specs)
        self.weights: Tuple[np.ndarray, ...] = tuple(frozen_w)
        self.biases: Tuple[np.ndarray, ...] = tuple(frozen_b)

    @classmethod
    def mlp(
        cls,
        input_dim: int,
        output_dim: int,
        hidden_layers: int,
        width: int,
        rng: np.random.Generator,
    ) -> "Network":
        """Glorot-uniform initialized MLP with zero biases."""
        dims = [input_dim] + [width] * hidden_layers + [output_dim]
        specs = [
            LayerSpec(d_in, d_out, Activation.SOFTPLUS if i < hidden_layers else Activation.IDENTITY)
            for i, (d_in, d_out) in enumerate(zip(dims, dims[1:]))
        ]
        weights = [glorot_uniform(rng, s.in_dim, s.out_dim) for s in specs]
        biases = [np.zeros(s.out_dim) for s in specs]
        return cls(specs, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].out_dim

    @property
    def n_hidden(self) -> int:
        return len(self.specs) - 1

    @property
    def params(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "Network":
        """A new network with the same layer specs and the given flat parameter list."""
        if len(params) != 2 * len(self.specs):
            raise ShapeError("parameter list", 2 * len(self.specs), len(params))
        return Network(self.specs, params[0::2], params[1::2])

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return forward(self, x)[0]

    def hidden_features(self, x: ArrayLike) -> np.ndarray:
        """Output of the last hidden layer, used as a fixed regression basis."""
        if self.n_hidden < 1:
            raise InputError("Network has no hidden layer")
        _, cache = forward(self, x)
        feats = cache.activations[-2]
        return feats[0] if cache.single else feats

    def to_dict(self) -> Dict[str, Any]:
        return {
            "layers": [
                {
                    "in": s.in_dim,
                    "out": s.out_dim,
                    "activation": s.activation.value,
                    "w": w.ravel().tolist(),
                    "b": b.tolist(),
                }
                for s, w, b in zip(self.specs, self.weights, self.biases)
            ]
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Network":
        specs, weights, biases = [], [], []
        for layer in data["layers"]:
            spec = LayerSpec(int(layer["in"]), int(layer["out"]), Activation(layer["activation"]))
            specs.append(spec)
            weights.append(np.asarray(layer["w"], dtype=np.float64).reshape(spec.out_dim, spec.in_dim))
            biases.append(np.asarray(layer["b"], dtype=np.float64))
        return cls(specs, weights, biases)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.specs == other.specs and all(
            np.array_equal(a, b) for a, b in zip(self.params, other.params)
        )

    def __repr__(self) -> str:
        dims = [self.input_dim] + [s.out_dim for s in self.specs]
        return f"Network(dims={dims})"


@dataclass
class ForwardCache:
    """Per-layer values kept by a forward pass for the backward pass."""
    activations: List[np.ndarray]  # activations[0] is the input, activations[-1] the output
    pre_activations: List[np.ndarray] = field(default_factory=list)
    sigmoids: List[Optional[np.ndarray]] = field(default_factory=list)  # softplus' per layer
    tangents: Optional[List[np.ndarray]] = None  # d activations / d alpha, same layout as activations
    pre_tangents: Optional[List[np.ndarray]] = None
    single: bool = False
    specs: Tuple[LayerSpec, ...] = ()


@dataclass
class NetworkGradients:
    """Gradients in the network's parameter layout, plus the input gradient."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    d_input: np.ndarray

    @property
    def params(self) -> List[np.ndarray]:
        out: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def _as_batch(net: Network, x: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim <= 1
    batch = np.atleast_2d(arr) if arr.ndim == 1 else arr.reshape(1, -1) if arr.ndim == 0 else arr
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError("network input", (None, net.input_dim), arr.shape)
    return batch, single


def _run(net: Network, batch: np.ndarray, single: bool, with_tangent: bool) -> ForwardCache:
    cache = ForwardCache(activations=[batch], single=single, specs=net.specs)
    if with_tangent:
        seed = np.zeros_like(batch)
        seed[:, 0] = 1.0
        cache.tangents = [seed]
        cache.pre_tangents = []

    a = batch
    for spec, w, b in zip(net.specs, net.weights, net.biases):
        z = a @ w.T + b
        if spec.activation == Activation.SOFTPLUS:
            a, sig = softplus(z)
        else:
            a, sig = z, None
        cache.pre_activations.append(z)
        cache.sigmoids.append(sig)
        cache.activations.append(a)

        if with_tangent:
            z_dot = cache.tangents[-1] @ w.T
            a_dot = z_dot * sig if sig is not None else z_dot
            cache.pre_tangents.append(z_dot)
            cache.tangents.append(a_dot)
    return cache


def forward(net: Network, x: ArrayLike) -> Tuple[np.ndarray, ForwardCache]:
    """
    Evaluate the network.

    Args:
        net: Network to evaluate
        x: One input row (in_dim,) or a batch (n, in_dim)

    Returns:
        Output (out_dim,) or (n, out_dim), and the cache needed by ``backward``
    """
    batch, single = _as_batch(net, x)
    cache = _run(net, batch, single, with_tangent=False)
    y = cache.activations[-1]
    return (y[0] if single else y), cache


def forward_with_alpha_tangent(net: Network, x: ArrayLike, return_cache: bool = False):
    """
    Evaluate the network and its derivative along input coordinate 0 (alpha) in one pass.

    The tangent follows the layer recursion dz_i = W_i da_{i-1}, da_i = softplus'(z_i) * dz_i
    seeded with e_0. The primal output is computed exactly as ``forward`` does.

    Returns:
        (y, dy_dalpha), or (y, dy_dalpha, cache) when ``return_cache`` is set
    """
    batch, single = _as_batch(net, x)
    cache = _run(net, batch, single, with_tangent=True)
    y, dy = cache.activations[-1], cache.tangents[-1]
    if single:
        y, dy = y[0], dy[0]
    if return_cache:
        return y, dy, cache
    return y, dy


def backward(
    net: Network,
    cache: ForwardCache,
    d_out: ArrayLike,
    d_tangent: Optional[ArrayLike] = None,
) -> NetworkGradients:
    """
    Reverse-mode gradients of sum(d_out * y) (+ sum(d_tangent * dy_dalpha)).

    Parameter gradients are summed over the batch rows; ``d_input`` is per row.
    A tangent cotangent requires a cache from ``forward_with_alpha_tangent``.
    """
    if cache.specs != net.specs:
        raise ShapeError("cache layers", [s.out_dim for s in net.specs], [s.out_dim for s in cache.specs])
    n = cache.activations[0].shape[0]
    g_a = np.asarray(d_out, dtype=np.float64).reshape(n, net.output_dim)
    g_t = None
    if d_tangent is not None:
        if cache.tangents is None:
            raise InputError("d_tangent needs a cache from forward_with_alpha_tangent")
        g_t = np.asarray(d_tangent, dtype=np.float64).reshape(n, net.output_dim)

    d_w: List[np.ndarray] = [np.empty(0)] * len(net.specs)
    d_b: List[np.ndarray] = [np.empty(0)] * len(net.specs)
    for i in reversed(range(len(net.specs))):
        sig = cache.sigmoids[i]
        a_prev = cache.activations[i]
        if sig is None:
            g_z, g_zdot = g_a, g_t
        else:
            g_z = g_a * sig
            g_zdot = None
            if g_t is not None:
                g_zdot = g_t * sig
                # second-order term: d(sig)/dz = sig (1 - sig)
                g_z = g_z + g_t * sig * (1.0 - sig) * cache.pre_tangents[i]

        dw = g_z.T @ a_prev
        if g_zdot is not None:
            dw = dw + g_zdot.T @ cache.tangents[i]
        d_w[i] = dw
        d_b[i] = g_z.sum(axis=0)

        w = net.weights[i]
        g_a = g_z @ w
        g_t = g_zdot @ w if g_zdot is not None else None

    d_input = g_a[0] if cache.single else g_a
    return NetworkGradients(weights=d_w, biases=d_b, d_input=d_input)


def interp_weights(alpha: ArrayLike, grid: InterpGrid) -> np.ndarray:
    """
    Coefficients c(alpha) with interp value = outputs . c(alpha).

    c_0 = 1 and c_j = (min(alpha, a_{j+1}) - a_j) 1{alpha >= a_j} for j >= 1.
    """
    alphas = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    tol = 1e-12
    if np.any(alphas < grid.low - tol) or np.any(alphas > grid.high + tol):
        bad = alphas[(alphas < grid.low - tol) | (alphas > grid.high + tol)][0]
        raise DomainError("alpha", float(bad), f"[{grid.low}, {grid.high}]")
    knots = np.asarray(grid.knots)
    lower, upper = knots[:-1], knots[1:]
    a = alphas[:, None]
    seg = np.where(a >= lower, np.minimum(a, upper) - lower, 0.0)
    return np.concatenate([np.ones((alphas.size, 1)), seg], axis=1)


def interp_head_eval(outputs: ArrayLike, alpha: ArrayLike, grid: InterpGrid):
    """
    Piecewise-linear interpolation head: outputs[0] is the value at the first knot,
    outputs[j] the slope on (a_j, a_{j+1}).

    Accepts one output vector with a scalar alpha, or (n, K) outputs with n alphas.
    """
    out = np.asarray(outputs, dtype=np.float64)
    if out.shape[-1] != grid.size:
        raise ShapeError("interp outputs", grid.size, out.shape[-1])
    coeffs = interp_weights(alpha, grid)
    if out.ndim == 1:
        values = coeffs @ out
        return float(values[0]) if np.ndim(alpha) == 0 else values
    return np.sum(out * coeffs, axis=1)
