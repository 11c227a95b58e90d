"""
Dataset model: features, responses, optional per-row alpha and twin responses.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from src.riskquant.exceptions import DomainError, ShapeError


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    A finite sample of (X, Y).

    ``alpha_col`` holds one confidence level per row for multi-alpha training;
    ``Y_twin`` is a second response drawn conditionally independently of ``Y``
    given the same feature row.
    """
    X: np.ndarray
    Y: np.ndarray
    alpha_col: Optional[np.ndarray] = None
    Y_twin: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.asarray(self.Y, dtype=np.float64).ravel()
        n = X.shape[0]
        if Y.shape[0] != n:
            raise ShapeError("Y", n, Y.shape[0])
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

        if self.alpha_col is not None:
            a = np.asarray(self.alpha_col, dtype=np.float64).ravel()
            if a.shape[0] != n:
                raise ShapeError("alpha_col", n, a.shape[0])
            if not np.all((a > 0.0) & (a < 1.0)):
                raise DomainError("alpha_col", float(a[~((a > 0) & (a < 1))][0]), "(0, 1)")
            object.__setattr__(self, "alpha_col", a)
        if self.Y_twin is not None:
            t = np.asarray(self.Y_twin, dtype=np.float64).ravel()
            if t.shape[0] != n:
                raise ShapeError("Y_twin", n, t.shape[0])
            object.__setattr__(self, "Y_twin", t)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def has_twins(self) -> bool:
        return self.Y_twin is not None

    def take(self, idx) -> "Dataset":
        """Rows ``idx`` as a new dataset."""
        return Dataset(
            X=self.X[idx],
            Y=self.Y[idx],
            alpha_col=None if self.alpha_col is None else self.alpha_col[idx],
            Y_twin=None if self.Y_twin is None else self.Y_twin[idx],
        )

    def with_alpha(self, alpha_col: np.ndarray) -> "Dataset":
        return Dataset(X=self.X, Y=self.Y, alpha_col=alpha_col, Y_twin=self.Y_twin)

    def with_response(self, Y: np.ndarray) -> "Dataset":
        return Dataset(X=self.X, Y=Y, alpha_col=self.alpha_col, Y_twin=self.Y_twin)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=[f"x_{i}" for i in range(self.dim)])
        frame["y"] = self.Y
        if self.alpha_col is not None:
            frame["alpha"] = self.alpha_col
        if self.Y_twin is not None:
            frame["y_twin"] = self.Y_twin
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write with header x_0..x_{d-1}, y[, alpha, y_twin]."""
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Dataset":
        frame = pd.read_csv(path, float_precision="round_trip")
        x_cols = [c for c in frame.columns if c.startswith("x_")]
        return cls(
            X=frame[x_cols].to_numpy(),
            Y=frame["y"].to_numpy(),
            alpha_col=frame["alpha"].to_numpy() if "alpha" in frame else None,
            Y_twin=frame["y_twin"].to_numpy() if "y_twin" in frame else None,
        )
