"""
Conditionally Gaussian toy model with closed-form conditional VaR and ES.

X ~ N(0, I_d) and, given X, Y = P1(X) + |P2(X)| Z with Z standard normal. P1 and P2
are degree-2 polynomials over the monomials 1, x_i and x_i x_j (i < j).
"""
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from src.riskquant.core.losses import check_alpha
from src.riskquant.exceptions import InputError, ShapeError
from src.riskquant.models.dataset import Dataset
from src.riskquant.oracles.normal import norm_cdf, norm_pdf, norm_ppf


def basis_size(d: int) -> int:
    return 1 + d + d * (d - 1) // 2


def monomials(X: np.ndarray) -> np.ndarray:
    """Rows [1, x_1..x_d, x_i x_j for i < j] in row-major (i, j) order."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    iu, ju = np.triu_indices(d, k=1)
    return np.concatenate([np.ones((n, 1)), X, X[:, iu] * X[:, ju]], axis=1)


@dataclass(frozen=True, eq=False)
class GaussianToySpec:
    """Coefficients of P1 (``lam``, the conditional mean) and P2 (``mu``, signed conditional std)."""
    d: int
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        if self.d < 1:
            raise InputError(f"Toy dimension must be >= 1, got {self.d}")
        size = basis_size(self.d)
        lam = np.asarray(self.lam, dtype=np.float64).ravel()
        mu = np.asarray(self.mu, dtype=np.float64).ravel()
        if lam.shape[0] != size:
            raise ShapeError("lambda coefficients", size, lam.shape[0])
        if mu.shape[0] != size:
            raise ShapeError("mu coefficients", size, mu.shape[0])
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    def mean(self, X) -> np.ndarray:
        return monomials(X) @ self.lam

    def std(self, X) -> np.ndarray:
        return np.abs(monomials(X) @ self.mu)

    def to_dict(self) -> Dict[str, Any]:
        return {"d": self.d, "lambda": self.lam.tolist(), "mu": self.mu.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GaussianToySpec":
        return cls(d=int(data["d"]), lam=np.asarray(data["lambda"]), mu=np.asarray(data["mu"]))


def toy_spec_sample(d: int, rng: np.random.Generator) -> GaussianToySpec:
    """Draw every coefficient of both polynomials i.i.d. standard normal."""
    size = basis_size(d)
    lam = rng.standard_normal(size)
    mu = rng.standard_normal(size)
    return GaussianToySpec(d=d, lam=lam, mu=mu)


def toy_generate(spec: GaussianToySpec, n: int, rng: np.random.Generator, twins: bool = False) -> Dataset:
    """Sample n rows; with ``twins`` a second response shares X but uses an independent Z."""
    if n < 1:
        raise InputError(f"Sample size must be >= 1, got {n}")
    X = rng.standard_normal((n, spec.d))
    mean, std = spec.mean(X), spec.std(X)
    Y = mean + std * rng.standard_normal(n)
    Y_twin = mean + std * rng.standard_normal(n) if twins else None
    return Dataset(X=X, Y=Y, Y_twin=Y_twin)


def toy_var_es_closed(spec: GaussianToySpec, x, alpha) -> Tuple[np.ndarray, np.ndarray]:
    """
    Conditional VaR and ES at ``x`` (one row or a batch).

    VaR = mu(x) + sigma(x) Phi^-1(a), ES = mu(x) + sigma(x) phi(Phi^-1(a)) / (1 - a).
    """
    a = check_alpha(alpha)
    single = np.ndim(x) == 1
    mean, std = spec.mean(x), spec.std(x)
    u = norm_ppf(a)
    var = mean + std * u
    es = mean + std * norm_pdf(u) / (1.0 - a)
    if single:
        return float(var[0]), float(es[0])
    return var, es


def toy_conditional_tail_mean(spec: GaussianToySpec, x, q) -> np.ndarray:
    """
    E[(Y - q)^+ | X = x] = sigma [phi(u) - u (1 - Phi(u))], u = (q - mu) / sigma.

    Reduces to (mu - q)^+ where sigma(x) = 0.
    """
    mean, std = spec.mean(x), spec.std(x)
    q = np.asarray(q, dtype=np.float64)
    degenerate = std <= 0
    safe = np.where(degenerate, 1.0, std)
    u = (q - mean) / safe
    tail = safe * (norm_pdf(u) - u * (1.0 - norm_cdf(u)))
    return np.where(degenerate, np.maximum(mean - q, 0.0), tail)


def toy_exceedance_probability(spec: GaussianToySpec, x, q) -> np.ndarray:
    """P[Y > q | X = x]."""
    mean, std = spec.mean(x), spec.std(x)
    q = np.asarray(q, dtype=np.float64)
    degenerate = std <= 0
    safe = np.where(degenerate, 1.0, std)
    return np.where(degenerate, (mean > q).astype(float), 1.0 - norm_cdf((q - mean) / safe))
