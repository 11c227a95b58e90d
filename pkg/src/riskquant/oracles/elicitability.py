"""
Brute-force laboratory for the elicitability of VaR, ES given VaR, and (VaR, ES).

Every minimizer here is found by exhaustive evaluation of an expected loss over a
grid, so the results can be compared with the definitional quantities without
trusting any optimizer.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.riskquant.core.losses import JointLossSpec, check_alpha
from src.riskquant.exceptions import InputError, IntegrationError
from src.riskquant.oracles.normal import gaussian_var_es, norm_ppf
from src.riskquant.utils.logging import get_logger

logger = get_logger(__name__)

GRID_POINTS = 2001
TIE_TOL = 1e-12
SAMPLE_RANGE = (1e-4, 1.0 - 1e-4)


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """A finitely supported law: strictly increasing ``values`` with positive ``probs`` summing to one."""
    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if values.size == 0 or values.shape != probs.shape:
            raise InputError("A discrete law needs matching, non-empty values and probabilities")
        if np.any(np.diff(values) <= 0):
            raise InputError("Atom values must be strictly increasing")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise InputError("Atom probabilities must be positive and sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_atoms(cls, atoms: Sequence[Tuple[float, float]]) -> "DiscreteDist":
        ordered = sorted(atoms)
        return cls(values=[v for v, _ in ordered], probs=[p for _, p in ordered])

    @classmethod
    def point_mass(cls, c: float) -> "DiscreteDist":
        return cls(values=[c], probs=[1.0])

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def cdf(self, t: float) -> float:
        return float(self.probs[self.values <= t].sum())

    def quantile(self, alpha: float) -> float:
        """inf{t : F(t) >= alpha}."""
        check_alpha(alpha)
        idx = int(np.searchsorted(np.cumsum(self.probs), alpha - TIE_TOL, side="left"))
        return float(self.values[min(idx, self.values.size - 1)])

    def default_grid(self) -> np.ndarray:
        base = np.linspace(self.values[0] - 1.0, self.values[-1] + 1.0, GRID_POINTS)
        return np.union1d(base, self.values)


@dataclass(frozen=True)
class UniformLaw:
    """Uniform law on [a, b], handled analytically."""
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise InputError(f"Uniform law needs a < b, got [{self.a}, {self.b}]")

    def cdf(self, t: float) -> float:
        return float(np.clip((t - self.a) / (self.b - self.a), 0.0, 1.0))

    def quantile(self, alpha: float) -> float:
        return self.a + float(check_alpha(alpha)) * (self.b - self.a)


Law = Union[DiscreteDist, UniformLaw, np.ndarray]


def _as_law(law) -> Law:
    if isinstance(law, (DiscreteDist, UniformLaw)):
        return law
    samples = np.sort(np.asarray(law, dtype=np.float64).ravel())
    if samples.size == 0:
        raise InputError("Sampled law is empty")
    return samples


def _law_range(law: Law) -> Tuple[float, float]:
    if isinstance(law, DiscreteDist):
        return float(law.values[0]), float(law.values[-1])
    if isinstance(law, UniformLaw):
        return law.a, law.b
    lo, hi = np.quantile(law, SAMPLE_RANGE)
    return float(lo), float(hi)


def _default_grid(law: Law) -> np.ndarray:
    if isinstance(law, DiscreteDist):
        return law.default_grid()
    lo, hi = _law_range(law)
    if hi - lo <= 0:
        lo, hi = lo - 1.0, hi + 1.0
    return np.linspace(lo, hi, GRID_POINTS)


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64).ravel()
    if g.size == 0:
        raise InputError("Brute-force grid is empty")
    return g


def _cdf(law: Law, t: float) -> float:
    if isinstance(law, (DiscreteDist, UniformLaw)):
        return law.cdf(t)
    return float(np.searchsorted(law, t, side="right")) / law.size


def tail_moments(law, v) -> Tuple[np.ndarray, np.ndarray]:
    """E[(Y - v)^+] and E[((Y - v)^+)^2] for each v."""
    law = _as_law(law)
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if isinstance(law, UniformLaw):
        w = law.b - law.a
        gap = np.clip(law.b - v, 0.0, None)
        full = v < law.a
        m1 = np.where(full, (law.a + law.b) / 2.0 - v, gap ** 2 / (2.0 * w))
        m2 = np.where(full, ((law.b - v) ** 3 - (law.a - v) ** 3) / (3.0 * w), gap ** 3 / (3.0 * w))
        return m1, m2
    if isinstance(law, DiscreteDist):
        excess = np.maximum(law.values[None, :] - v[:, None], 0.0)
        return excess @ law.probs, (excess ** 2) @ law.probs
    # Sorted samples: suffix sums give every tail mean in O(n + grid log n).
    n = law.size
    suffix1 = np.concatenate([np.cumsum(law[::-1])[::-1], [0.0]])
    suffix2 = np.concatenate([np.cumsum((law ** 2)[::-1])[::-1], [0.0]])
    idx = np.searchsorted(law, v, side="right")
    count = n - idx
    s1, s2 = suffix1[idx], suffix2[idx]
    m1 = (s1 - count * v) / n
    m2 = (s2 - 2.0 * v * s1 + count * v * v) / n
    return m1, np.maximum(m2, 0.0)


@dataclass
class QuantileMinimizerResult:
    argmin: np.ndarray
    quantile: float
    min_loss: float
    contains_quantile: bool


def brute_force_quantile_minimizer(dist: DiscreteDist, alpha: float, grid=None) -> QuantileMinimizerResult:
    """
    All grid points minimizing the expected pinball loss, plus the definitional quantile.

    Args:
        dist: Discrete law
        alpha: Confidence level
        grid: Candidate values; defaults to 2001 points over [min - 1, max + 1] plus the atoms
    """
    a = float(check_alpha(alpha))
    grid = dist.default_grid() if grid is None else _check_grid(grid)
    m1, _ = tail_moments(dist, grid)
    losses = m1 / (1.0 - a) + grid
    best = float(losses.min())
    ties = grid[losses <= best + TIE_TOL * max(1.0, abs(best))]
    q = dist.quantile(a)
    contains = bool(np.any(np.isclose(ties, q, rtol=0.0, atol=1e-12)))
    return QuantileMinimizerResult(argmin=ties, quantile=q, min_loss=best, contains_quantile=contains)


@dataclass
class EsMinimizerResult:
    argmin: float
    target: float
    precondition_ok: bool
    grid_step: float


def brute_force_es_minimizer(law, q: float, alpha: float, grid=None) -> EsMinimizerResult:
    """
    Minimize E[(z - (1 - alpha)^-1 (Y - q)^+)^2] over a grid of increments z.

    The minimizer is (1 - alpha)^-1 E[(Y - q)^+], which equals ES - q only when
    F(q) = alpha. A violated precondition is reported in the result and logged.
    """
    a = float(check_alpha(alpha))
    law = _as_law(law)
    if grid is None:
        lo, hi = _law_range(law)
        grid = _default_grid(law) if hi > lo else np.linspace(-1.0, 1.0, GRID_POINTS) + q
        grid = grid - q
    grid = _check_grid(grid)

    m1, m2 = tail_moments(law, q)
    mean_t = float(m1[0]) / (1.0 - a)
    mean_t2 = float(m2[0]) / (1.0 - a) ** 2
    losses = grid * grid - 2.0 * grid * mean_t + mean_t2
    argmin = float(grid[int(np.argmin(losses))])

    f_q = _cdf(law, q)
    if isinstance(law, np.ndarray):
        tol = 4.0 * math.sqrt(a * (1.0 - a) / law.size) + 1.0 / law.size
    else:
        tol = 1e-9
    ok = abs(f_q - a) <= tol
    if not ok:
        logger.warning("es_precondition_violated", cdf_at_q=f_q, alpha=a)
    step = float(np.min(np.diff(np.sort(grid)))) if grid.size > 1 else 0.0
    return EsMinimizerResult(argmin=argmin, target=mean_t, precondition_ok=ok, grid_step=step)


@dataclass
class JointMinimizerResult:
    v: float
    z: float
    min_loss: float
    cell: Tuple[float, float]


def brute_force_joint_minimizer(
    law,
    alpha: float,
    grid_v=None,
    grid_z=None,
    spec: JointLossSpec = JointLossSpec(),
) -> JointMinimizerResult:
    """
    2-D grid argmin of the expected joint (VaR, ES) loss.

    With a = (1 - alpha)^-1 E[(Y - v)^+] + v the expected loss separates as
    a(v) (1 - h2'(z)) + h2'(z) z - h2(z), so only E[(Y - v)^+] depends on the law.
    """
    alpha = float(check_alpha(alpha))
    law = _as_law(law)
    gv = _default_grid(law) if grid_v is None else _check_grid(grid_v)
    gz = _default_grid(law) if grid_z is None else _check_grid(grid_z)

    m1, _ = tail_moments(law, gv)
    a_v = m1 / (1.0 - alpha) + gv
    h, h_p, _ = spec.h2(gz)
    surface = a_v[:, None] * (1.0 - h_p[None, :]) + (h_p * gz - h)[None, :]
    i, j = np.unravel_index(int(np.argmin(surface)), surface.shape)
    cell = (
        float(np.max(np.diff(gv))) if gv.size > 1 else 0.0,
        float(np.max(np.diff(gz))) if gz.size > 1 else 0.0,
    )
    return JointMinimizerResult(v=float(gv[i]), z=float(gz[j]), min_loss=float(surface[i, j]), cell=cell)


def es_by_minimization(law, alpha: float, scale: float = 1.0, grid=None) -> float:
    """
    ES as (1/c) min_v E[pinball(cY, v)] for c = ``scale`` > 0.

    The minimum of the expected pinball loss is ES of the scaled response, and ES is
    positively homogeneous, so dividing by c recovers ES(Y).
    """
    a = float(check_alpha(alpha))
    if not scale > 0:
        raise InputError(f"Scale must be > 0, got {scale}")
    law = _as_law(law)
    if isinstance(law, DiscreteDist):
        scaled: Law = DiscreteDist(values=law.values * scale, probs=law.probs)
    elif isinstance(law, UniformLaw):
        scaled = UniformLaw(law.a * scale, law.b * scale)
    else:
        scaled = law * scale
    grid = _default_grid(scaled) if grid is None else _check_grid(grid) * scale
    m1, _ = tail_moments(scaled, grid)
    return float(np.min(m1 / (1.0 - a) + grid)) / scale


def acerbi_es(quantile_fn: Callable, alpha: float, n_points: int) -> float:
    """
    ES = (1 - alpha)^-1 * integral over (alpha, 1) of VaR_beta, by the composite midpoint rule.

    Raises:
        IntegrationError: If any quantile value is not finite
    """
    a = float(check_alpha(alpha))
    if n_points < 2:
        raise InputError(f"n_points must be >= 2, got {n_points}")
    h = (1.0 - a) / n_points
    betas = a + (np.arange(n_points) + 0.5) * h
    values = np.broadcast_to(np.asarray(quantile_fn(betas), dtype=np.float64), betas.shape)
    if not np.all(np.isfinite(values)):
        raise IntegrationError(f"Quantile function returned non-finite values on ({a}, 1)")
    return math.fsum(values.tolist()) / n_points


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def stratified_normal_sample(n: int) -> np.ndarray:
    """Deterministic N(0, 1) sample Phi^-1((i - 0.5) / n), i = 1..n."""
    return norm_ppf((np.arange(1, n + 1) - 0.5) / n)


def run_elicitability_checks(n_samples: int = 200_000, alphas: Optional[Sequence[float]] = None) -> List[CheckResult]:
    """
    Run the brute-force suite on discrete, uniform and Gaussian laws.

    Every check compares a grid minimizer with its definitional counterpart
    within one grid cell.
    """
    results: List[CheckResult] = []

    two_point = DiscreteDist.from_atoms([(0.0, 0.5), (1.0, 0.5)])
    r = brute_force_quantile_minimizer(two_point, 0.5)
    inside = (r.argmin >= -1e-12) & (r.argmin <= 1.0 + 1e-12)
    results.append(CheckResult(
        "quantile_flat_segment",
        bool(np.all(inside) and r.quantile == 0.0 and r.contains_quantile and r.argmin.size > 1),
        {"quantile": r.quantile, "n_argmin": int(r.argmin.size)},
    ))

    skewed = DiscreteDist.from_atoms([(0.0, 0.3), (1.0, 0.7)])
    r = brute_force_quantile_minimizer(skewed, 0.5)
    results.append(CheckResult(
        "quantile_unique",
        bool(r.argmin.size == 1 and abs(r.argmin[0] - 1.0) < 1e-12 and r.quantile == 1.0),
        {"argmin": r.argmin.tolist()},
    ))

    r = brute_force_quantile_minimizer(DiscreteDist.point_mass(5.0), 0.9)
    results.append(CheckResult("quantile_point_mass", bool(r.argmin.size == 1 and r.argmin[0] == 5.0), {}))

    es_r = brute_force_es_minimizer(UniformLaw(0.0, 1.0), 0.75, 0.75)
    results.append(CheckResult(
        "es_uniform",
        bool(es_r.precondition_ok and abs(es_r.argmin - 0.125) <= es_r.grid_step),
        {"argmin": es_r.argmin},
    ))

    sample = stratified_normal_sample(n_samples)
    for a in alphas or (0.9, 0.95):
        var, es = gaussian_var_es(0.0, 1.0, a)
        es_r = brute_force_es_minimizer(sample, float(var), a)
        results.append(CheckResult(
            f"es_gaussian_{a}",
            bool(es_r.precondition_ok and abs(es_r.argmin - (es - var)) <= es_r.grid_step + 1e-3),
            {"argmin": es_r.argmin, "expected": float(es - var)},
        ))
        j = brute_force_joint_minimizer(sample, a)
        results.append(CheckResult(
            f"joint_gaussian_{a}",
            bool(abs(j.v - var) <= j.cell[0] + 1e-3 and abs(j.z - es) <= j.cell[1] + 1e-3),
            {"v": j.v, "z": j.z, "var": float(var), "es": float(es)},
        ))
        for c in (0.5, 2.0):
            est = es_by_minimization(sample, a, scale=c)
            step = (_law_range(sample)[1] - _law_range(sample)[0]) / (GRID_POINTS - 1)
            results.append(CheckResult(
                f"es_scaling_{a}_{c}",
                bool(abs(est - es) <= step + 1e-3),
                {"estimate": est, "expected": float(es)},
            ))
        acerbi = acerbi_es(norm_ppf, a, 100_000)
        results.append(CheckResult(f"acerbi_gaussian_{a}", bool(abs(acerbi - es) < 1e-4), {"estimate": acerbi}))

    for check in results:
        logger.debug("elicitability_check", name=check.name, passed=check.passed)
    return results
