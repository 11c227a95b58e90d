"""
Fitted VaR and ES models, their alpha handling, and JSON serialization.
"""
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from src.riskquant.core.losses import TruncationBound, check_alpha
from src.riskquant.core.nn_core import InterpGrid, Network, interp_head_eval
from src.riskquant.exceptions import InputError, ShapeError, UsageError
from src.riskquant.trainers.transforms import (
    IDENTITY,
    AffineTransform,
    FeatureScaler,
    ResponseTransform,
    transform_from_dict,
)

ALPHA_TOL = 1e-12

QuantileFn = Callable[[np.ndarray], np.ndarray]


class AlphaMode(str, Enum):
    SINGLE = "single"
    CONTINUUM = "continuum"
    INTERP = "interp"


class ArchitectureConfig(BaseModel):
    """Softplus MLP shape; width defaults to twice the network's input dimension."""

    hidden_layers: int = Field(default=3, ge=0, description="Number of Softplus hidden layers")
    width: Optional[int] = Field(default=None, ge=1, description="Hidden units per layer")

    model_config = {"frozen": True}

    def width_for(self, input_dim: int) -> int:
        return self.width if self.width is not None else 2 * input_dim

    def build(self, input_dim: int, output_dim: int, rng: np.random.Generator) -> Network:
        return Network.mlp(input_dim, output_dim, self.hidden_layers, self.width_for(input_dim), rng)


@dataclass(frozen=True)
class AlphaFeatureMap:
    """
    Network coordinate for alpha: -log(1 - alpha) rescaled affinely onto [-1, 1]
    over the trained range. Strictly increasing, so d/dalpha keeps its sign.
    """
    low: float
    high: float

    def __call__(self, alpha) -> np.ndarray:
        lo, hi = -np.log1p(-self.low), -np.log1p(-self.high)
        u = -np.log1p(-np.asarray(alpha, dtype=np.float64))
        return 2.0 * (u - lo) / (hi - lo) - 1.0

    def derivative(self, alpha) -> np.ndarray:
        """d(feature)/d(alpha), used to turn network tangents into d/dalpha."""
        lo, hi = -np.log1p(-self.low), -np.log1p(-self.high)
        return 2.0 / ((hi - lo) * (1.0 - np.asarray(alpha, dtype=np.float64)))


def _rows(x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def _alpha_column(alpha, n: int) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    if a.ndim == 0:
        return np.full(n, float(a))
    a = a.ravel()
    if a.shape[0] != n:
        raise ShapeError("alpha values", n, a.shape[0])
    return a


@dataclass(eq=False)
class VarModel:
    """
    A fitted conditional quantile model.

    SINGLE nets take the d scaled features and emit 1 value; CONTINUUM nets take the
    alpha feature followed by the d features; INTERP nets emit one value per grid knot
    and are read through the interpolation head.
    """
    mode: AlphaMode
    net: Network
    alpha: Optional[float] = None
    alpha_range: Optional[Tuple[float, float]] = None
    grid: Optional[InterpGrid] = None
    transform: ResponseTransform = IDENTITY
    scaler: Optional[FeatureScaler] = None
    history: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.mode = AlphaMode(self.mode)
        d = self.scaler.dim if self.scaler is not None else None
        if self.mode == AlphaMode.SINGLE:
            if self.alpha is None:
                raise InputError("A single-alpha model needs its alpha")
            self.alpha = float(check_alpha(self.alpha))
            self._expect(out=1, inp=d)
        elif self.mode == AlphaMode.CONTINUUM:
            if self.alpha_range is None:
                raise InputError("A continuum model needs its alpha range")
            lo, hi = (float(v) for v in self.alpha_range)
            check_alpha([lo, hi])
            if not lo < hi:
                raise InputError(f"Alpha range must be increasing, got ({lo}, {hi})")
            self.alpha_range = (lo, hi)
            self._expect(out=1, inp=None if d is None else d + 1)
        else:
            if self.grid is None:
                raise InputError("An interpolation model needs its grid")
            self._expect(out=self.grid.size, inp=d)

    def _expect(self, out: int, inp: Optional[int]) -> None:
        if self.net.output_dim != out:
            raise ShapeError(f"{self.mode.value} network outputs", out, self.net.output_dim)
        if inp is not None and self.net.input_dim != inp:
            raise ShapeError(f"{self.mode.value} network inputs", inp, self.net.input_dim)

    @property
    def alpha_map(self) -> AlphaFeatureMap:
        return AlphaFeatureMap(*self.alpha_range)

    def covers(self, alpha) -> bool:
        a = np.asarray(alpha, dtype=np.float64)
        if self.mode == AlphaMode.SINGLE:
            return bool(np.all(np.abs(a - self.alpha) <= ALPHA_TOL))
        lo, hi = self.alpha_range if self.mode == AlphaMode.CONTINUUM else (self.grid.low, self.grid.high)
        return bool(np.all((a >= lo - ALPHA_TOL) & (a <= hi + ALPHA_TOL)))

    def require(self, alpha) -> None:
        if not self.covers(alpha):
            raise UsageError(f"alpha={alpha} is outside what this {self.mode.value} model was trained for")

    def scaled(self, X: np.ndarray) -> np.ndarray:
        return X if self.scaler is None else self.scaler.apply(X)

    def net_inputs(self, X, alpha) -> np.ndarray:
        """Rows fed to the network for features ``X`` at ``alpha``."""
        rows, _ = _rows(X)
        feats = self.scaled(rows)
        if self.mode != AlphaMode.CONTINUUM:
            return feats
        a = _alpha_column(alpha, feats.shape[0])
        return np.column_stack([self.alpha_map(a), feats])

    def raw_output(self, X, alpha) -> np.ndarray:
        """Network value in transformed space, one per row."""
        self.require(alpha)
        rows, _ = _rows(X)
        out = self.net(self.net_inputs(rows, alpha))
        if self.mode == AlphaMode.INTERP:
            return np.atleast_1d(interp_head_eval(out, _alpha_column(alpha, rows.shape[0]), self.grid))
        return out[:, 0]

    def predict(self, X, alpha):
        """VaR at ``alpha`` for one feature row (returns a float) or a batch."""
        _, single = _rows(X)
        values = np.asarray(self.transform.inverse(self.raw_output(X, alpha)))
        return float(values[0]) if single else values

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "var",
            "mode": self.mode.value,
            "alpha": self.alpha,
            "alpha_range": list(self.alpha_range) if self.alpha_range else None,
            "grid": list(self.grid.knots) if self.grid else None,
            "transform": self.transform.to_dict(),
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "network": self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VarModel":
        return cls(
            mode=AlphaMode(data["mode"]),
            net=Network.from_dict(data["network"]),
            alpha=data.get("alpha"),
            alpha_range=tuple(data["alpha_range"]) if data.get("alpha_range") else None,
            grid=InterpGrid(tuple(data["grid"])) if data.get("grid") else None,
            transform=transform_from_dict(data.get("transform", {})),
            scaler=FeatureScaler.from_dict(data["scaler"]) if data.get("scaler") else None,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class EsInput(str, Enum):
    FEATURES = "features"      # scaled X only
    VAR_INPUTS = "var_inputs"  # exactly what the candidate VaR network sees


@dataclass(eq=False)
class EsModel:
    """
    ES as the candidate quantile plus a non-negative increment.

    The increment network predicts in the units of ``transform`` (loc + scale * net);
    ``var_model`` is a fitted VarModel or any callable returning VaR at ``alpha``.
    """
    var_model: Union[VarModel, QuantileFn]
    alpha: float
    increment_net: Network
    input_kind: EsInput = EsInput.FEATURES
    trunc: TruncationBound = None
    transform: AffineTransform = IDENTITY
    scaler: Optional[FeatureScaler] = None
    method: str = "es_fullnet"
    history: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.alpha = float(check_alpha(self.alpha))
        self.input_kind = EsInput(self.input_kind)
        if self.input_kind == EsInput.VAR_INPUTS and not isinstance(self.var_model, VarModel):
            raise InputError("Increment networks on VaR inputs need a fitted VarModel candidate")
        if self.increment_net.output_dim != 1:
            raise ShapeError("increment network outputs", 1, self.increment_net.output_dim)

    def require(self, alpha) -> None:
        if alpha is not None and not np.all(np.abs(np.asarray(alpha, dtype=np.float64) - self.alpha) <= ALPHA_TOL):
            raise UsageError(f"ES model was fitted at alpha={self.alpha}, asked for {alpha}")

    def quantile(self, X) -> np.ndarray:
        rows, _ = _rows(X)
        if isinstance(self.var_model, VarModel):
            return np.asarray(self.var_model.predict(rows, self.alpha))
        return np.asarray(self.var_model(rows), dtype=np.float64).ravel()

    def increment(self, X) -> np.ndarray:
        """Unclamped increment estimate, one per row."""
        rows, _ = _rows(X)
        if self.input_kind == EsInput.VAR_INPUTS:
            inputs = self.var_model.net_inputs(rows, self.alpha)
        else:
            inputs = rows if self.scaler is None else self.scaler.apply(rows)
        return self.transform.inverse(self.increment_net(inputs)[:, 0])

    def predict(self, X, alpha=None):
        """ES = VaR + max(increment, 0)."""
        self.require(alpha)
        _, single = _rows(X)
        values = self.quantile(X) + np.maximum(self.increment(X), 0.0)
        return float(values[0]) if single else values

    def to_dict(self) -> Dict[str, Any]:
        candidate = self.var_model.to_dict() if isinstance(self.var_model, VarModel) else None
        return {
            "kind": "es",
            "method": self.method,
            "alpha": self.alpha,
            "trunc": self.trunc,
            "input_kind": self.input_kind.value,
            "transform": self.transform.to_dict(),
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "var_model": candidate,
            "increment_network": self.increment_net.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], candidate: Optional[QuantileFn] = None) -> "EsModel":
        if data.get("var_model") is not None:
            var_model: Union[VarModel, QuantileFn] = VarModel.from_dict(data["var_model"])
        elif candidate is not None:
            var_model = candidate
        else:
            raise InputError("ES model was saved with an external VaR candidate; pass it as `candidate`")
        transform = transform_from_dict(data.get("transform", {}))
        if not isinstance(transform, AffineTransform):
            raise InputError("ES increment transforms must be affine")
        return cls(
            var_model=var_model,
            alpha=data["alpha"],
            increment_net=Network.from_dict(data["increment_network"]),
            input_kind=EsInput(data.get("input_kind", "features")),
            trunc=data.get("trunc"),
            transform=transform,
            scaler=FeatureScaler.from_dict(data["scaler"]) if data.get("scaler") else None,
            method=data.get("method", "es_fullnet"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


RiskModel = Union[VarModel, EsModel]


def predict(model: RiskModel, x, alpha):
    """Evaluate a VaR or ES model at ``alpha``; raises UsageError on an alpha the model does not cover."""
    return model.predict(x, alpha)


def model_from_dict(data: Dict[str, Any]) -> RiskModel:
    kind = data.get("kind")
    if kind == "var":
        return VarModel.from_dict(data)
    if kind == "es":
        return EsModel.from_dict(data)
    raise InputError(f"Unknown model kind '{kind}'")


def load_model(path: Union[str, Path]) -> RiskModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_model(model: RiskModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.to_json(), encoding="utf-8")
    return path
