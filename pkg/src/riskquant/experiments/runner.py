"""
Batch experiment runner.

Each run r of an experiment uses the seed derive_run_seed(master, r). Runs are
independent and may execute on up to RISKQUANT_THREADS worker threads; their
outputs are written in run order once all runs finished, so metrics.jsonl does
not depend on scheduling.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.riskquant.config.experiment import ExperimentConfig, ExperimentKind
from src.riskquant.config.settings import settings
from src.riskquant.core.nn_core import InterpGrid
from src.riskquant.core.optim import TrainConfig
from src.riskquant.dim.margin import (
    benchmark_im_nested,
    coupon_steps,
    im_labels,
    im_profile,
    learn_im_backward,
    learned_im_paths,
    sawtooth_fraction,
)
from src.riskquant.dim.market import sample_portfolio, simulate_paths
from src.riskquant.exceptions import InputError, StageError
from src.riskquant.models.dataset import Dataset
from src.riskquant.models.metrics import MetricsRecord
from src.riskquant.oracles.elicitability import run_elicitability_checks
from src.riskquant.oracles.gaussian_toy import GaussianToySpec, toy_generate, toy_spec_sample, toy_var_es_closed
from src.riskquant.tracking.storage import ArtifactStore
from src.riskquant.tracking.workflow import RunTracker
from src.riskquant.trainers.fitting import EsFitMode, fit_es_two_step, fit_joint, fit_var, upper_tail_grid
from src.riskquant.trainers.models import EsModel, VarModel
from src.riskquant.trainers.transforms import IDENTITY, AffineTransform
from src.riskquant.utils.logging import get_logger, log_run_metrics
from src.riskquant.utils.seeding import SeedStreams, counter_rng, derive_run_seed
from src.riskquant.validation.metrics import convergence_slope, crossing_rate, normalized_rmse, wasserstein_1d
from src.riskquant.validation.twin import es_error_proxy, pvalue_error_estimate

logger = get_logger(__name__)

# Rows kept in density plot data
PLOT_ROWS = 4096

# Keys identifying one summary cell besides the metric name
GROUP_KEYS = ["method", "alpha", "d", "n"]


@dataclass
class RunOutput:
    """Everything one run produced, written to the artifact directory afterwards."""
    run: int
    seed: int
    records: List[MetricsRecord] = field(default_factory=list)
    plots: Dict[str, pd.DataFrame] = field(default_factory=dict)
    models: Dict[str, Any] = field(default_factory=dict)

    def timing_rows(self) -> List[Dict[str, Any]]:
        return [
            {"run": rec.run, "method": rec.method, "alpha": rec.alpha, "d": rec.d, "n": rec.n, "wall_ms": rec.wall_ms}
            for rec in self.records
        ]


@dataclass
class ExperimentResult:
    """Outcome of run_experiment."""
    output_dir: Path
    records: List[MetricsRecord]
    summary: pd.DataFrame
    failed_checks: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed_checks


def _fmt(alpha: Optional[float]) -> str:
    return "none" if alpha is None else f"{alpha:g}"


def _timed(fn: Callable[[], Any]) -> Tuple[Any, float]:
    start = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - start) * 1000.0


class RunContext:
    """Seeds, settings and the stage tracker of one run."""

    def __init__(self, cfg: ExperimentConfig, run: int, tracker: RunTracker):
        self.cfg = cfg
        self.run = run
        self.seed = derive_run_seed(cfg.seed, run)
        self.streams = SeedStreams(self.seed)
        self.train_cfg: TrainConfig = cfg.train.model_copy(update={"seed": self.seed})
        self.tracker = tracker
        self.trace_id = tracker.start_trace(cfg.experiment.value, run_index=run, seed=self.seed)
        self.output = RunOutput(run=run, seed=self.seed)

    def stage(self, name: str, **inputs):
        return self.tracker.stage(self.trace_id, name, inputs)

    def record(self, **fields) -> MetricsRecord:
        rec = MetricsRecord(experiment=self.cfg.experiment.value, run=self.run, seed=self.seed, **fields)
        self.output.records.append(rec)
        log_run_metrics(rec.method, rec.alpha, rec.wall_ms, True, extra={"run": self.run, **rec.metric_values()})
        return rec

    def keep_model(self, name: str, model) -> None:
        self.output.models[f"{name}_run{self.run}"] = model

    def keep_plot(self, name: str, frame: pd.DataFrame) -> None:
        if self.run == 0:
            self.output.plots[name] = frame


# ----------------------------------------------------------------- toy helpers


def toy_spec_for(cfg: ExperimentConfig, d: int) -> GaussianToySpec:
    """The toy law of dimension d; shared by every run so runs differ only in samples."""
    return toy_spec_sample(d, counter_rng(cfg.seed, d))


def continuum_range(cfg: ExperimentConfig, alphas: Sequence[float]) -> Tuple[float, float]:
    if cfg.alpha_range is not None:
        return tuple(cfg.alpha_range)
    return min(0.85, min(alphas)), max(0.999, max(alphas))


def interp_grid(alphas: Sequence[float]) -> InterpGrid:
    return upper_tail_grid(first=min(1e-3, 1.0 - max(alphas)), last=max(0.15, 1.0 - min(alphas)))


def _response_transform(cfg: ExperimentConfig, data: Dataset) -> AffineTransform:
    return AffineTransform.standardizing(data.Y) if cfg.standardize_response else IDENTITY


def fit_var_models(ctx: RunContext, method: str, data: Dataset, alphas: Sequence[float]) -> Tuple[Dict[float, VarModel], Dict[float, float]]:
    """
    Fit ``method`` for every alpha: one model per alpha for 'single', one shared
    model otherwise. Returns the models and the fit wall time keyed by alpha.
    """
    cfg = ctx.cfg
    transform = _response_transform(cfg, data)
    if method == "single":
        models, times = {}, {}
        for a in alphas:
            with ctx.stage(f"fit:{method}", alpha=a, n=len(data)):
                models[a], times[a] = _timed(lambda: fit_var(
                    method, data, [a], arch=cfg.arch, cfg=ctx.train_cfg, transform=transform,
                ))
        return models, times
    with ctx.stage(f"fit:{method}", alphas=list(alphas), n=len(data)):
        model, wall = _timed(lambda: fit_var(
            method,
            data,
            list(alphas),
            arch=cfg.arch,
            cfg=ctx.train_cfg,
            lam=cfg.lam,
            alpha_range=continuum_range(cfg, alphas),
            grid=interp_grid(alphas),
            transform=transform,
        ))
    return {a: model for a in alphas}, {a: wall for a in alphas}


def _toy_sets(ctx: RunContext, spec: GaussianToySpec, n: int) -> Tuple[Dataset, Dataset]:
    """Training rows from the data stream and held-out twin rows from the eval stream."""
    with ctx.stage("simulate", d=spec.d, n=n):
        train = toy_generate(spec, n, ctx.streams.rng("data"))
        held_out = toy_generate(spec, ctx.cfg.n_eval, ctx.streams.rng("eval"), twins=True)
    return train, held_out


def _density(truth: np.ndarray, estimate: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"truth": truth[:PLOT_ROWS], "estimate": estimate[:PLOT_ROWS]})


def _var_record(ctx: RunContext, method: str, model: VarModel, spec: GaussianToySpec, held_out: Dataset,
                alpha: float, n: int, wall_ms: float, extra: Optional[Dict[str, float]] = None) -> MetricsRecord:
    q_true, _ = toy_var_es_closed(spec, held_out.X, alpha)
    q_hat = np.asarray(model.predict(held_out.X, alpha))
    twin = pvalue_error_estimate(lambda X: model.predict(X, alpha), held_out, alpha)
    ctx.keep_plot(f"density_{method}_a{_fmt(alpha)}_d{spec.d}_n{n}", _density(q_true, q_hat))
    return ctx.record(
        method=method,
        alpha=alpha,
        n=n,
        d=spec.d,
        rmse_norm=normalized_rmse(q_hat, q_true),
        pvalue_err=twin.point,
        pvalue_err_ci_hi=twin.ci_high,
        wasserstein=wasserstein_1d(q_hat, q_true),
        extra=extra or {},
        wall_ms=wall_ms,
    )


# ----------------------------------------------------------------- experiments


def run_toy_var(ctx: RunContext) -> None:
    cfg = ctx.cfg
    for d in cfg.dims:
        spec = toy_spec_for(cfg, d)
        for n in cfg.sizes:
            train, held_out = _toy_sets(ctx, spec, n)
            for method in cfg.resolved_methods:
                models, times = fit_var_models(ctx, method, train, cfg.alphas)
                with ctx.stage(f"evaluate:{method}", d=d, n=n):
                    for a in cfg.alphas:
                        _var_record(ctx, method, models[a], spec, held_out, a, n, times[a])
                for a, model in models.items():
                    ctx.keep_model(f"{method}_a{_fmt(a)}_d{d}_n{n}", model)
                    if method != "single":
                        break


def _es_record(ctx: RunContext, method: str, es: EsModel, spec: GaussianToySpec, held_out: Dataset,
               alpha: float, n: int, wall_ms: float, var_model=None) -> MetricsRecord:
    q_true, s_true = toy_var_es_closed(spec, held_out.X, alpha)
    s_hat = np.asarray(es.predict(held_out.X))
    q_hat = es.quantile(held_out.X)
    proxy = es_error_proxy(lambda X: es.quantile(X), lambda X: es.predict(X), held_out, alpha)
    extra = {"var_rmse_norm": normalized_rmse(q_hat, q_true)}
    if var_model is not None:
        extra["var_pvalue_err"] = pvalue_error_estimate(lambda X: var_model.predict(X, alpha), held_out, alpha).point
    ctx.keep_plot(f"density_{method}_a{_fmt(alpha)}_d{spec.d}_n{n}", _density(s_true, s_hat))
    return ctx.record(
        method=method,
        alpha=alpha,
        n=n,
        d=spec.d,
        rmse_norm=normalized_rmse(s_hat, s_true),
        es_proxy=proxy.point,
        es_proxy_ci_hi=proxy.ci_high,
        wasserstein=wasserstein_1d(s_hat, s_true),
        extra=extra,
        wall_ms=wall_ms,
    )


def _two_step(ctx: RunContext, method: str, train: Dataset, spec: GaussianToySpec,
              var_model: VarModel, alpha: float) -> Tuple[EsModel, float]:
    """Second ES step; FullNet follows the configured candidate, FrozenLR needs the fitted network."""
    cfg = ctx.cfg
    mode = EsFitMode.FULL_NET if method == "es_fullnet" else EsFitMode.FROZEN_LR
    candidate = var_model
    if mode == EsFitMode.FULL_NET and cfg.es_candidate == "true":
        candidate = lambda X: toy_var_es_closed(spec, X, alpha)[0]  # noqa: E731
    with ctx.stage(f"fit:{method}", alpha=alpha, n=len(train)):
        return _timed(lambda: fit_es_two_step(
            train, candidate, alpha, mode=mode, trunc=cfg.trunc, arch=cfg.arch, cfg=ctx.train_cfg,
        ))


def run_toy_es(ctx: RunContext) -> None:
    cfg = ctx.cfg
    for d in cfg.dims:
        spec = toy_spec_for(cfg, d)
        for n in cfg.sizes:
            train, held_out = _toy_sets(ctx, spec, n)
            var_models, _ = fit_var_models(ctx, "single", train, cfg.alphas)
            for a in cfg.alphas:
                for method in cfg.resolved_methods:
                    es, wall = _two_step(ctx, method, train, spec, var_models[a], a)
                    with ctx.stage(f"evaluate:{method}", alpha=a):
                        _es_record(ctx, method, es, spec, held_out, a, n, wall, var_model=var_models[a])
                    if cfg.es_candidate == "learned" or method == "es_frozenlr":
                        ctx.keep_model(f"{method}_a{_fmt(a)}_d{d}_n{n}", es)


def run_toy_joint(ctx: RunContext) -> None:
    cfg = ctx.cfg
    for d in cfg.dims:
        spec = toy_spec_for(cfg, d)
        for n in cfg.sizes:
            train, held_out = _toy_sets(ctx, spec, n)
            var_models: Dict[float, VarModel] = {}
            for a in cfg.alphas:
                for method in cfg.resolved_methods:
                    if method == "joint":
                        transform = _response_transform(cfg, train)
                        with ctx.stage("fit:joint", alpha=a, n=n):
                            (var_model, es), wall = _timed(lambda: fit_joint(
                                train, a, arch=cfg.arch, cfg=ctx.train_cfg, transform=transform,
                            ))
                    else:
                        if a not in var_models:
                            var_models.update(fit_var_models(ctx, "single", train, [a])[0])
                        var_model = var_models[a]
                        es, wall = _two_step(ctx, method, train, spec, var_model, a)
                    with ctx.stage(f"evaluate:{method}", alpha=a):
                        _es_record(ctx, method, es, spec, held_out, a, n, wall, var_model=var_model)
                    ctx.keep_model(f"{method}_a{_fmt(a)}_d{d}_n{n}", es)


def default_pairs(alphas: Sequence[float]) -> List[Tuple[float, float]]:
    """Adjacent pairs of the sorted alphas, highest first."""
    ordered = sorted(set(alphas), reverse=True)
    return list(zip(ordered[:-1], ordered[1:]))


def run_crossing(ctx: RunContext) -> None:
    cfg = ctx.cfg
    pairs = [tuple(p) for p in cfg.crossing_pairs] or default_pairs(cfg.alphas)
    if not pairs:
        raise InputError("Crossing experiment needs crossing_pairs or at least two alphas")
    levels = sorted({a for pair in pairs for a in pair} | set(cfg.alphas))
    for d in cfg.dims:
        spec = toy_spec_for(cfg, d)
        for n in cfg.sizes:
            train, held_out = _toy_sets(ctx, spec, n)
            for method in cfg.resolved_methods:
                models, times = fit_var_models(ctx, method, train, levels)
                with ctx.stage(f"evaluate:{method}", d=d, n=n):
                    target = models if method == "single" else models[levels[0]]
                    rates = crossing_rate(target, held_out.X, pairs)
                    wall = sum(times.values()) if method == "single" else times[levels[0]]
                    for a in cfg.alphas:
                        rec = _var_record(ctx, method, models[a], spec, held_out, a, n, times[a])
                        rec.crossing.update(rates)
                    ctx.record(method=method, alpha=None, n=n, d=d, crossing=rates, wall_ms=wall)


def run_rate(ctx: RunContext) -> None:
    cfg = ctx.cfg
    for d in cfg.dims:
        spec = toy_spec_for(cfg, d)
        for method in cfg.resolved_methods:
            points: Dict[float, List[Tuple[float, float]]] = {a: [] for a in cfg.alphas}
            for n in sorted(cfg.sizes):
                train, held_out = _toy_sets(ctx, spec, n)
                models, times = fit_var_models(ctx, method, train, cfg.alphas)
                with ctx.stage(f"evaluate:{method}", d=d, n=n):
                    for a in cfg.alphas:
                        rec = _var_record(ctx, method, models[a], spec, held_out, a, n, times[a])
                        points[a].append((float(n), rec.rmse_norm))
            if len(cfg.sizes) < 2:
                continue
            for a, pts in points.items():
                slope, intercept = convergence_slope(pts)
                ctx.record(method=method, alpha=a, n=0, d=d, extra={"slope": slope, "intercept": intercept})


def run_twin_validate(ctx: RunContext) -> None:
    """Twin estimates for fitted models and for the closed form, exact and at a shifted alpha."""
    cfg = ctx.cfg
    for d in cfg.dims:
        spec = toy_spec_for(cfg, d)
        with ctx.stage("simulate_twins", d=d, n=cfg.n_twin):
            twins = toy_generate(spec, cfg.n_twin, ctx.streams.rng("eval"), twins=True)
        for a in cfg.alphas:
            shifted = a - 0.5 * (1.0 - a)
            with ctx.stage("evaluate:closed_form", alpha=a):
                exact_q = pvalue_error_estimate(lambda X: toy_var_es_closed(spec, X, a)[0], twins, a)
                exact_s = es_error_proxy(
                    lambda X: toy_var_es_closed(spec, X, a)[0], lambda X: toy_var_es_closed(spec, X, a)[1], twins, a,
                )
                ctx.record(
                    method="closed_form", alpha=a, n=cfg.n_twin, d=d,
                    pvalue_err=exact_q.point, pvalue_err_ci_hi=exact_q.ci_high,
                    es_proxy=exact_s.point, es_proxy_ci_hi=exact_s.ci_high,
                    extra={"pvalue_inner": exact_q.inner, "pvalue_inner_se": exact_q.std_error,
                           "es_inner": exact_s.inner, "es_inner_se": exact_s.std_error},
                )
                moved = pvalue_error_estimate(lambda X: toy_var_es_closed(spec, X, shifted)[0], twins, a)
                ctx.record(
                    method="closed_form_shifted", alpha=a, n=cfg.n_twin, d=d,
                    pvalue_err=moved.point, pvalue_err_ci_hi=moved.ci_high,
                    extra={"expected": abs(a - shifted), "ci_low": moved.ci_low},
                )
        for n in cfg.sizes:
            with ctx.stage("simulate", d=d, n=n):
                train = toy_generate(spec, n, ctx.streams.rng("data"))
            for method in cfg.resolved_methods:
                models, times = fit_var_models(ctx, method, train, cfg.alphas)
                with ctx.stage(f"evaluate:{method}", d=d, n=n):
                    for a in cfg.alphas:
                        model = models[a]
                        est = pvalue_error_estimate(lambda X: model.predict(X, a), twins, a)
                        q_true, _ = toy_var_es_closed(spec, twins.X, a)
                        ctx.record(
                            method=method, alpha=a, n=n, d=d,
                            rmse_norm=normalized_rmse(np.asarray(model.predict(twins.X, a)), q_true),
                            pvalue_err=est.point, pvalue_err_ci_hi=est.ci_high, wall_ms=times[a],
                        )


def run_dim(ctx: RunContext) -> None:
    cfg = ctx.cfg
    market = cfg.market.model_copy(update={"seed": ctx.seed})
    portfolio = sample_portfolio(cfg.market)
    with ctx.stage("simulate_paths", n_paths=cfg.dim.n_paths):
        paths = simulate_paths(market, cfg.dim.n_paths, portfolio=portfolio)
        labels = im_labels(paths)
    step = cfg.dim.benchmark_step if cfg.dim.benchmark_step is not None else labels.n_steps // 2
    if step >= labels.n_steps:
        raise InputError(f"benchmark_step {step} has no full margin window; last usable step is {labels.n_steps - 1}")
    ctx.keep_plot("portfolio", portfolio.to_frame())
    steps_with_coupon = coupon_steps(paths.times, labels.delta_steps)

    for method in cfg.resolved_methods:
        with ctx.stage(f"fit:{method}", steps=labels.n_steps):
            models, wall = _timed(lambda: learn_im_backward(
                labels,
                alphas=cfg.alphas,
                method=method,
                arch=cfg.arch,
                cfg=ctx.train_cfg,
                warm_start=cfg.dim.warm_start,
                lam=cfg.lam,
                alpha_range=continuum_range(cfg, cfg.alphas) if method in ("multi1", "multi2") else None,
                grid=interp_grid(cfg.alphas) if method == "multi3" else None,
            ))
        for a in cfg.alphas:
            nested_cfg = cfg.nested.model_copy(update={"alpha": a, "seed": ctx.seed})
            with ctx.stage("benchmark:nested", alpha=a, step=step, n_outer=cfg.dim.n_outer):
                bench = benchmark_im_nested(
                    market, cfg.dim.n_outer, nested_cfg, step, portfolio, path_offset=cfg.dim.n_paths,
                )
            with ctx.stage(f"evaluate:{method}", alpha=a):
                learned = models.predict(step, bench.states, a)
                im_paths = learned_im_paths(models, labels, a)
                profile = im_profile(im_paths, labels.times)
                profile["benchmark_mean"] = np.where(np.arange(labels.n_steps) == step, float(np.mean(bench.im)), np.nan)
                ctx.keep_plot(f"im_profile_{method}_a{_fmt(a)}", profile)
                ctx.keep_plot(
                    f"im_benchmark_{method}_a{_fmt(a)}",
                    pd.DataFrame({"r": bench.states[:, 0], "r_fix": bench.states[:, 2], "nested": bench.im, "learned": learned}),
                )
                ctx.record(
                    method=method,
                    alpha=a,
                    n=cfg.dim.n_paths,
                    d=labels.features.shape[2],
                    rmse_norm=normalized_rmse(learned, bench.im),
                    wasserstein=wasserstein_1d(learned, bench.im),
                    extra={
                        "sawtooth_fraction": sawtooth_fraction(profile["mean"].to_numpy(), steps_with_coupon),
                        "benchmark_step": float(step),
                    },
                    wall_ms=wall,
                )
        for j, model in enumerate(models.models):
            ctx.keep_model(f"im_{method}_step{int(labels.steps[j])}", model)


def run_elicit_check(ctx: RunContext) -> None:
    with ctx.stage("elicitability_checks", n_samples=ctx.cfg.elicit_samples):
        checks = run_elicitability_checks(ctx.cfg.elicit_samples, ctx.cfg.alphas)
    for check in checks:
        numeric = {k: float(v) for k, v in check.detail.items() if isinstance(v, (int, float)) and not isinstance(v, bool)}
        ctx.record(method=check.name, alpha=None, extra={"passed": float(check.passed), **numeric})


PIPELINES: Dict[ExperimentKind, Callable[[RunContext], None]] = {
    ExperimentKind.TOY_VAR: run_toy_var,
    ExperimentKind.TOY_ES: run_toy_es,
    ExperimentKind.TOY_JOINT: run_toy_joint,
    ExperimentKind.CROSSING: run_crossing,
    ExperimentKind.RATE: run_rate,
    ExperimentKind.TWIN_VALIDATE: run_twin_validate,
    ExperimentKind.ELICIT_CHECK: run_elicit_check,
    ExperimentKind.DIM: run_dim,
}


# ----------------------------------------------------------------- summaries


def _flatten(row: Dict[str, Any]) -> List[Dict[str, Any]]:
    rec = MetricsRecord(**row)
    keys = {k: row.get(k) for k in GROUP_KEYS}
    return [{**keys, "metric": name, "value": value} for name, value in rec.metric_values().items()]


def summarize(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """
    Mean and sample std (ddof=1) of every metric over runs, per (method, alpha, d, n).

    A single run reports std 0. Rows are those of metrics.jsonl, so the table can
    always be recomputed from that file.
    """
    columns = GROUP_KEYS + ["metric", "mean", "std", "runs"]
    long = [item for row in rows for item in _flatten(row)]
    if not long:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(long)
    grouped = frame.groupby(GROUP_KEYS + ["metric"], dropna=False, sort=True)["value"]
    table = grouped.agg(mean="mean", std=lambda s: s.std(ddof=1) if len(s) > 1 else 0.0, runs="count").reset_index()
    return table[columns]


def rate_points(records: Sequence[MetricsRecord]) -> Dict[str, pd.DataFrame]:
    """Log-log convergence points (mean normalized RMSE over runs per n) per method and alpha."""
    rows = [
        {"method": r.method, "alpha": r.alpha, "d": r.d, "n": r.n, "rmse_norm": r.rmse_norm}
        for r in records
        if r.n > 0 and r.rmse_norm is not None
    ]
    out: Dict[str, pd.DataFrame] = {}
    if not rows:
        return out
    frame = pd.DataFrame(rows)
    for (method, alpha, d), group in frame.groupby(["method", "alpha", "d"], sort=True):
        mean = group.groupby("n", sort=True)["rmse_norm"].mean().reset_index()
        mean["log_n"] = np.log(mean["n"])
        mean["log_rmse"] = np.log(mean["rmse_norm"])
        if len(mean) >= 2:
            slope, _ = convergence_slope(list(zip(mean["n"], mean["rmse_norm"])))
            mean["slope"] = slope
        out[f"rate_points_{method}_a{_fmt(alpha)}_d{d}"] = mean
    return out


# ----------------------------------------------------------------- driver


def _execute_run(cfg: ExperimentConfig, run: int, store: ArtifactStore) -> RunOutput:
    tracker = RunTracker(storage_backends=[store.traces])
    ctx = RunContext(cfg, run, tracker)
    logger.info("run_started", experiment=cfg.experiment.value, run=run, seed=ctx.seed)
    try:
        PIPELINES[cfg.experiment](ctx)
    except StageError:
        tracker.complete_trace(ctx.trace_id, status="failed")
        raise
    except Exception as exc:
        tracker.complete_trace(ctx.trace_id, status="failed")
        raise StageError(f"run:{run}", exc) from exc
    tracker.complete_trace(ctx.trace_id)
    logger.info("run_complete", experiment=cfg.experiment.value, run=run, records=len(ctx.output.records))
    return ctx.output


def run_experiment(cfg: ExperimentConfig, output_dir: Optional[str] = None) -> ExperimentResult:
    """
    Execute every run of ``cfg`` and write the artifact directory.

    Args:
        cfg: Validated experiment configuration
        output_dir: Overrides the configured artifact directory

    Returns:
        The artifact directory, all records and the summary table

    Raises:
        StageError: If any stage of any run fails, naming the stage
    """
    root = Path(output_dir or cfg.resolved_output_dir)
    store = ArtifactStore(root)
    store.reset()
    resolved = cfg.resolved()
    resolved["output_dir"] = str(root)
    store.write_config(resolved)

    workers = max(1, min(settings.THREADS, cfg.runs))
    logger.info("experiment_started", experiment=cfg.experiment.value, runs=cfg.runs, workers=workers, output_dir=str(root))
    if workers == 1:
        outputs = [_execute_run(cfg, r, store) for r in range(cfg.runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(lambda r: _execute_run(cfg, r, store), range(cfg.runs)))

    records: List[MetricsRecord] = []
    for out in outputs:
        store.append_metrics(rec.to_row() for rec in out.records)
        store.append_timings(out.timing_rows())
        for name, model in out.models.items():
            store.write_model(name, model)
        for name, frame in out.plots.items():
            store.write_plotdata(name, frame)
        records.extend(out.records)

    if cfg.experiment == ExperimentKind.RATE:
        for name, frame in rate_points(records).items():
            store.write_plotdata(name, frame)

    summary = summarize(store.read_metrics())
    store.write_summary(summary)

    failed: List[str] = []
    if cfg.experiment == ExperimentKind.ELICIT_CHECK:
        failed = sorted({r.method for r in records if r.extra.get("passed", 1.0) < 1.0})
    logger.info("experiment_complete", experiment=cfg.experiment.value, records=len(records), failed_checks=len(failed))
    return ExperimentResult(output_dir=root, records=records, summary=summary, failed_checks=failed)
