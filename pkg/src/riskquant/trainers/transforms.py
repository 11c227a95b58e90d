"""
Monotone response transforms and the input feature scaler carried by fitted models.

A model trained on h(Y) predicts in transformed space; ``inverse`` maps the network
output back. Quantiles commute with any increasing h, ES only with affine h.
"""
from dataclasses import dataclass
from typing import Any, Dict, Union

import numpy as np

from src.riskquant.exceptions import InputError, ShapeError

_TANH_EDGE = 1.0 - 1e-15


@dataclass(frozen=True)
class AffineTransform:
    """h(y) = (y - loc) / scale with scale > 0; the default is the identity."""
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.loc) and self.scale > 0 and np.isfinite(self.scale)):
            raise InputError(f"Affine transform needs finite loc and scale > 0, got ({self.loc}, {self.scale})")

    @classmethod
    def standardizing(cls, y) -> "AffineTransform":
        """Centre and scale by the sample mean and std; a constant sample keeps scale 1."""
        arr = np.asarray(y, dtype=np.float64)
        sd = float(np.std(arr))
        return cls(loc=float(np.mean(arr)), scale=sd if sd > 0 else 1.0)

    @property
    def is_identity(self) -> bool:
        return self.loc == 0.0 and self.scale == 1.0

    def forward(self, y):
        return (np.asarray(y, dtype=np.float64) - self.loc) / self.scale

    def inverse(self, u):
        return self.loc + self.scale * np.asarray(u, dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        if self.is_identity:
            return {"kind": "identity"}
        return {"kind": "affine", "loc": self.loc, "scale": self.scale}


@dataclass(frozen=True)
class TanhTransform:
    """h(y) = tanh((y - loc) / scale), squashing heavy tails into (-1, 1)."""
    scale: float = 1.0
    loc: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise InputError(f"Tanh transform needs scale > 0, got {self.scale}")

    def forward(self, y):
        return np.tanh((np.asarray(y, dtype=np.float64) - self.loc) / self.scale)

    def inverse(self, u):
        u = np.clip(np.asarray(u, dtype=np.float64), -_TANH_EDGE, _TANH_EDGE)
        return self.loc + self.scale * np.arctanh(u)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "tanh", "loc": self.loc, "scale": self.scale}


ResponseTransform = Union[AffineTransform, TanhTransform]

IDENTITY = AffineTransform()


def transform_from_dict(data: Dict[str, Any]) -> ResponseTransform:
    kind = data.get("kind", "identity")
    if kind == "identity":
        return IDENTITY
    if kind == "affine":
        return AffineTransform(loc=float(data["loc"]), scale=float(data["scale"]))
    if kind == "tanh":
        return TanhTransform(scale=float(data["scale"]), loc=float(data["loc"]))
    raise InputError(f"Unknown transform kind '{kind}'")


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    """Column-wise (x - mean) / scale fitted on training features."""
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        scale = np.asarray(self.scale, dtype=np.float64).ravel()
        if mean.shape != scale.shape:
            raise ShapeError("scaler", mean.shape, scale.shape)
        if np.any(scale <= 0):
            raise InputError("Feature scales must be > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def fit(cls, X) -> "FeatureScaler":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        sd = X.std(axis=0)
        return cls(mean=X.mean(axis=0), scale=np.where(sd > 0, sd, 1.0))

    @classmethod
    def identity(cls, d: int) -> "FeatureScaler":
        return cls(mean=np.zeros(d), scale=np.ones(d))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ShapeError("features", self.dim, X.shape[-1])
        return (X - self.mean) / self.scale

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureScaler":
        return cls(mean=np.asarray(data["mean"]), scale=np.asarray(data["scale"]))
