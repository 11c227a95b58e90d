"""
Surrogate market for the dynamic initial margin study.

One-factor Vasicek short rate with exact transitions, and a portfolio of
fixed-vs-float swaps on an annual calendar priced in closed form from Vasicek
zero-coupon bonds. The state is (r_t, t, r_fix) where r_fix is the short rate at
the last fixing date, which sets the floating coupon currently accruing.
MtM is the ex-coupon portfolio value plus all coupons paid so far (undiscounted).
"""
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from src.riskquant.exceptions import InputError, ShapeError
from src.riskquant.utils.logging import get_logger
from src.riskquant.utils.seeding import SeedStreams, counter_rng

logger = get_logger(__name__)

STATE_NAMES = ("r", "t", "r_fix")
_EPS_T = 1e-9
_PATHSET_MAGIC = b"RQPS"
_PATHSET_VERSION = 1


class MarketConfig(BaseModel):
    """Vasicek dynamics, portfolio draw and time grid of the surrogate."""

    kappa: float = Field(default=0.3, gt=0, description="Mean-reversion speed")
    theta: float = Field(default=0.03, description="Long-run mean rate")
    sigma_r: float = Field(default=0.01, ge=0, description="Short-rate volatility; 0 gives deterministic paths")
    r0: float = Field(default=0.02, description="Initial short rate")
    n_swaps: int = Field(default=20, ge=0)
    max_maturity: int = Field(default=10, ge=1, description="Swap maturities are drawn in [1, max_maturity] years")
    horizon_years: float = Field(default=10.0, gt=0)
    steps: int = Field(default=40, ge=2, description="Grid steps over the horizon")
    delta: Optional[float] = Field(default=None, gt=0, description="Margin period of risk in years; one step if unset")
    payer_fraction: float = Field(default=0.8, ge=0, le=1, description="Probability a swap pays fixed")
    rate_spread: float = Field(default=0.0025, ge=0, description="Std of fixed rates around par")
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _grid_holds_coupon_dates(self) -> "MarketConfig":
        per_year = self.steps / self.horizon_years
        if abs(per_year - round(per_year)) > 1e-9 or round(per_year) < 1:
            raise ValueError("steps / horizon_years must be a positive integer so coupon dates lie on the grid")
        if self.max_maturity > self.horizon_years + _EPS_T:
            raise ValueError("max_maturity must not exceed horizon_years")
        if self.delta is not None:
            m = self.delta / self.dt
            if abs(m - round(m)) > 1e-9 or not 1 <= round(m) < self.steps:
                raise ValueError("delta must be a whole number of grid steps, shorter than the horizon")
        return self

    @property
    def dt(self) -> float:
        return self.horizon_years / self.steps

    @property
    def steps_per_year(self) -> int:
        return int(round(self.steps / self.horizon_years))

    @property
    def delta_steps(self) -> int:
        return 1 if self.delta is None else int(round(self.delta / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon_years, self.steps + 1)


def vasicek_b(tau, kappa: float) -> np.ndarray:
    return (1.0 - np.exp(-kappa * np.asarray(tau, dtype=np.float64))) / kappa


def zcb_price(r, tau, cfg: MarketConfig) -> np.ndarray:
    """P(t, t + tau) = A(tau) exp(-B(tau) r) under Vasicek."""
    tau = np.asarray(tau, dtype=np.float64)
    b = vasicek_b(tau, cfg.kappa)
    k2 = cfg.kappa * cfg.kappa
    log_a = (cfg.theta - cfg.sigma_r ** 2 / (2.0 * k2)) * (b - tau) - cfg.sigma_r ** 2 * b * b / (4.0 * cfg.kappa)
    return np.exp(log_a - b * np.asarray(r, dtype=np.float64))


def vasicek_mean(t, cfg: MarketConfig) -> np.ndarray:
    """E[r_t] = r0 e^{-kappa t} + theta (1 - e^{-kappa t})."""
    e = np.exp(-cfg.kappa * np.asarray(t, dtype=np.float64))
    return cfg.r0 * e + cfg.theta * (1.0 - e)


def vasicek_step(r, h: float, cfg: MarketConfig, z) -> np.ndarray:
    """Exact transition over h given standard normal shocks z."""
    e = np.exp(-cfg.kappa * h)
    sd = cfg.sigma_r * np.sqrt((1.0 - e * e) / (2.0 * cfg.kappa))
    return np.asarray(r) * e + cfg.theta * (1.0 - e) + sd * np.asarray(z)


def par_rate(maturity: int, cfg: MarketConfig) -> float:
    """Annual fixed rate giving zero value at inception."""
    years = np.arange(1, maturity + 1, dtype=np.float64)
    p = zcb_price(cfg.r0, years, cfg)
    return float((1.0 - p[-1]) / p.sum())


@dataclass(frozen=True, eq=False)
class SwapPortfolio:
    """Annual fixed-vs-float swaps starting at 0; direction +1 pays fixed, -1 receives fixed."""
    maturity: np.ndarray
    fixed_rate: np.ndarray
    notional: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a).ravel() for a in (self.maturity, self.fixed_rate, self.notional, self.direction)]
        if len({a.shape for a in arrays}) != 1:
            raise ShapeError("portfolio columns", arrays[0].shape, [a.shape for a in arrays])
        for name, a, dtype in zip(("maturity", "fixed_rate", "notional", "direction"), arrays,
                                  (np.int64, np.float64, np.float64, np.float64)):
            object.__setattr__(self, name, a.astype(dtype))

    @property
    def size(self) -> int:
        return self.maturity.shape[0]

    @classmethod
    def empty(cls) -> "SwapPortfolio":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "maturity": self.maturity,
            "fixed_rate": self.fixed_rate,
            "notional": self.notional,
            "direction": self.direction,
        })


def sample_portfolio(cfg: MarketConfig) -> SwapPortfolio:
    rng = SeedStreams(cfg.seed).rng("init")
    n = cfg.n_swaps
    maturity = rng.integers(1, cfg.max_maturity + 1, size=n)
    notional = rng.uniform(0.5, 1.5, size=n)
    direction = np.where(rng.random(n) < cfg.payer_fraction, 1.0, -1.0)
    fixed = np.array([par_rate(int(m), cfg) for m in maturity]) + cfg.rate_spread * rng.standard_normal(n)
    return SwapPortfolio(maturity=maturity, fixed_rate=fixed, notional=notional, direction=direction)


def portfolio_value(portfolio: SwapPortfolio, t: float, r, r_fix, cfg: MarketConfig) -> np.ndarray:
    """
    Ex-coupon value at time t for each (r, r_fix) pair.

    Per unit notional a live payer swap is worth P(t, T_n) / P_fix - P(t, T_M)
    - K sum_{j >= n} P(t, T_j), with T_n the next coupon date and P_fix the one-year
    bond price at the last fixing.
    """
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    r_fix = np.broadcast_to(np.asarray(r_fix, dtype=np.float64), r.shape)
    total = np.zeros_like(r)
    alive = portfolio.maturity > t + _EPS_T
    if not np.any(alive):
        return total

    next_date = int(np.floor(t + _EPS_T)) + 1
    last = int(portfolio.maturity[alive].max())
    dates = np.arange(next_date, last + 1, dtype=np.float64)
    bonds = zcb_price(r[:, None], dates[None, :] - t, cfg)
    annuity = np.cumsum(bonds, axis=1)
    p_fix = zcb_price(r_fix, 1.0, cfg)
    floating_head = bonds[:, 0] / p_fix

    for s in np.flatnonzero(alive):
        j = int(portfolio.maturity[s]) - next_date
        floating = floating_head - bonds[:, j]
        fixed = portfolio.fixed_rate[s] * annuity[:, j]
        total += portfolio.direction[s] * portfolio.notional[s] * (floating - fixed)
    return total


def coupon_cash(portfolio: SwapPortfolio, date: int, r_fix, cfg: MarketConfig) -> np.ndarray:
    """Net coupon paid at integer date ``date`` by swaps still running, floating rate fixed one year earlier."""
    r_fix = np.atleast_1d(np.asarray(r_fix, dtype=np.float64))
    paying = portfolio.maturity >= date
    if not np.any(paying):
        return np.zeros_like(r_fix)
    floating = 1.0 / zcb_price(r_fix, 1.0, cfg) - 1.0
    weight = portfolio.direction[paying] * portfolio.notional[paying]
    return floating * float(weight.sum()) - float(np.sum(weight * portfolio.fixed_rate[paying]))


def _coupon_date(t: float) -> Optional[int]:
    k = int(round(t))
    return k if k >= 1 and abs(t - k) < _EPS_T else None


def advance(
    portfolio: SwapPortfolio,
    cfg: MarketConfig,
    r: np.ndarray,
    r_fix: np.ndarray,
    cash: np.ndarray,
    step: int,
    z: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Move (r, r_fix, cash) from grid index ``step`` to ``step + 1``; coupons on the new date are paid, then refixed."""
    t_next = (step + 1) * cfg.dt
    r_next = vasicek_step(r, cfg.dt, cfg, z)
    date = _coupon_date(t_next)
    if date is not None:
        cash = cash + coupon_cash(portfolio, date, r_fix, cfg)
        r_fix = r_next
    return r_next, r_fix, cash


@dataclass(eq=False)
class PathSet:
    """
    Simulated states and MtM on the time grid.

    ``states`` is (paths, times, 3) with columns (r, t, r_fix); ``mtm`` is (paths, times).
    """
    times: np.ndarray
    states: np.ndarray
    mtm: np.ndarray
    delta_steps: int = 1
    path_offset: int = 0

    def __post_init__(self):
        n_paths, n_times = self.mtm.shape
        if self.states.shape[:2] != (n_paths, n_times) or self.times.shape != (n_times,):
            raise ShapeError("path set", (n_paths, n_times), (self.states.shape, self.times.shape))

    @property
    def n_paths(self) -> int:
        return self.mtm.shape[0]

    @property
    def rates(self) -> np.ndarray:
        return self.states[:, :, 0]

    def to_binary(self, path: Union[str, Path]) -> Path:
        """Little-endian float64 columns after a header of magic, version and dims."""
        path = Path(path)
        n_paths, n_times, state_dim = self.states.shape
        header = _PATHSET_MAGIC + struct.pack("<IQQQQ", _PATHSET_VERSION, n_paths, n_times, state_dim, self.delta_steps)
        with path.open("wb") as fh:
            fh.write(header)
            for block in (self.times, self.states, self.mtm):
                fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
        return path

    @classmethod
    def from_binary(cls, path: Union[str, Path]) -> "PathSet":
        raw = Path(path).read_bytes()
        head = len(_PATHSET_MAGIC) + struct.calcsize("<IQQQQ")
        if raw[:4] != _PATHSET_MAGIC:
            raise InputError(f"{path} is not a path set file")
        version, n_paths, n_times, state_dim, delta_steps = struct.unpack("<IQQQQ", raw[4:head])
        if version != _PATHSET_VERSION:
            raise InputError(f"Unsupported path set version {version}")
        data = np.frombuffer(raw, dtype="<f8", offset=head)
        times = data[:n_times]
        cut = n_times + n_paths * n_times * state_dim
        states = data[n_times:cut].reshape(n_paths, n_times, state_dim)
        mtm = data[cut:].reshape(n_paths, n_times)
        return cls(times=times.copy(), states=states.copy(), mtm=mtm.copy(), delta_steps=int(delta_steps))

    def to_frame(self) -> pd.DataFrame:
        n_paths, n_times, _ = self.states.shape
        frame = pd.DataFrame({
            "path": np.repeat(np.arange(n_paths) + self.path_offset, n_times),
            "step": np.tile(np.arange(n_times), n_paths),
        })
        for i, name in enumerate(STATE_NAMES[: self.states.shape[2]]):
            frame[name] = self.states[:, :, i].ravel()
        frame["mtm"] = self.mtm.ravel()
        return frame

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def simulate_paths(
    cfg: MarketConfig,
    n_paths: int,
    portfolio: Optional[SwapPortfolio] = None,
    path_offset: int = 0,
    until_step: Optional[int] = None,
) -> PathSet:
    """
    Simulate ``n_paths`` paths; path i draws its shocks from a generator keyed by
    (data seed, path_offset + i), so any path can be regenerated on its own.

    Args:
        cfg: Market settings
        n_paths: Number of paths
        portfolio: Swaps to value; drawn from ``cfg`` when omitted
        path_offset: Index of the first path, for disjoint out-of-sample sets
        until_step: Stop after this grid index (defaults to the horizon)
    """
    if n_paths < 1:
        raise InputError(f"n_paths must be >= 1, got {n_paths}")
    portfolio = sample_portfolio(cfg) if portfolio is None else portfolio
    last = cfg.steps if until_step is None else int(until_step)
    if not 0 <= last <= cfg.steps:
        raise InputError(f"until_step must lie in [0, {cfg.steps}], got {until_step}")

    data_seed = SeedStreams(cfg.seed).child_seed("data")
    shocks = np.empty((n_paths, cfg.steps))
    for i in range(n_paths):
        shocks[i] = counter_rng(data_seed, path_offset + i).standard_normal(cfg.steps)

    times = cfg.times[: last + 1]
    states = np.empty((n_paths, last + 1, len(STATE_NAMES)))
    mtm = np.empty((n_paths, last + 1))
    r = np.full(n_paths, cfg.r0)
    r_fix = r.copy()
    cash = np.zeros(n_paths)
    for k in range(last + 1):
        if k > 0:
            r, r_fix, cash = advance(portfolio, cfg, r, r_fix, cash, k - 1, shocks[:, k - 1])
        states[:, k, 0], states[:, k, 1], states[:, k, 2] = r, times[k], r_fix
        mtm[:, k] = portfolio_value(portfolio, times[k], r, r_fix, cfg) + cash

    logger.debug("paths_simulated", n_paths=n_paths, steps=last, swaps=portfolio.size)
    return PathSet(times=times, states=states, mtm=mtm, delta_steps=cfg.delta_steps, path_offset=path_offset)


def resimulate_increments(
    portfolio: SwapPortfolio,
    cfg: MarketConfig,
    r: float,
    r_fix: float,
    step: int,
    rng: np.random.Generator,
    size: int,
    delta_steps: Optional[int] = None,
) -> np.ndarray:
    """Draws of MtM_{t+delta} - MtM_t conditional on the state (r, r_fix) at grid index ``step``."""
    m = cfg.delta_steps if delta_steps is None else delta_steps
    if step + m > cfg.steps:
        raise InputError(f"Window from step {step} over {m} steps leaves the grid")
    t0 = step * cfg.dt
    start = portfolio_value(portfolio, t0, np.array([r]), np.array([r_fix]), cfg)[0]
    rr = np.full(size, float(r))
    rf = np.full(size, float(r_fix))
    cash = np.zeros(size)
    for k in range(step, step + m):
        rr, rf, cash = advance(portfolio, cfg, rr, rf, cash, k, rng.standard_normal(size))
    return portfolio_value(portfolio, (step + m) * cfg.dt, rr, rf, cfg) + cash - start
