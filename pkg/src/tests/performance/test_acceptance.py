"""
Acceptance-scale learning runs. Opt in with ``pytest -m performance``.
"""
import numpy as np
import pytest

from src.riskquant.config.experiment import parse_config
from src.riskquant.core.optim import TrainConfig
from src.riskquant.experiments import run_experiment
from src.riskquant.models.dataset import Dataset
from src.riskquant.oracles.gaussian_toy import toy_generate, toy_var_es_closed
from src.riskquant.oracles.normal import norm_cdf
from src.riskquant.trainers import ArchitectureConfig, fit_var_single
from src.riskquant.validation.nested import FunctionSampler, NestedMcConfig, nested_var_sa
from src.riskquant.validation.twin import es_error_proxy, pvalue_error_estimate

pytestmark = pytest.mark.performance

DESK_TRAIN = {"epochs": 100, "batch_size": 1024, "learning_rate": 0.005}


def _run(tmp_path, name, **fields):
    cfg = parse_config({"seed": 11, "output_dir": str(tmp_path / name), **fields})
    return run_experiment(cfg)


def _by(records, method, alpha=None, n=None):
    return [
        r for r in records
        if r.method == method and (alpha is None or r.alpha == alpha) and (n is None or r.n == n)
    ]


class TestSingleAlphaLearning:
    def test_unconditional_normal_quantile(self):
        """Test that features carrying no information still give the marginal quantile."""
        rng = np.random.default_rng(2024)
        n = 2**16
        train_set = Dataset(X=rng.standard_normal((n, 3)), Y=rng.standard_normal(n))
        cfg = TrainConfig(epochs=30, batch_size=1024, learning_rate=0.005, seed=5)
        model = fit_var_single(train_set, 0.975, arch=ArchitectureConfig(hidden_layers=2, width=6), cfg=cfg)
        q_hat = np.asarray(model.predict(rng.standard_normal((4096, 3)), 0.975))
        assert np.mean(np.abs(q_hat - 1.959964)) < 0.05

    def test_toy_model_accuracy(self, tmp_path):
        """Test the normalized RMSE of single-alpha VaR on the 5-dimensional toy model."""
        result = _run(tmp_path, "toy", experiment="toy_var", dims=[5], sizes=[2**16], alphas=[0.95],
                      methods=["single"], train=DESK_TRAIN)
        (rec,) = _by(result.records, "single", 0.95)
        assert rec.rmse_norm < 0.1


class TestMultiAlpha:
    def test_interpolated_grid_beats_single_in_the_extreme_tail(self, tmp_path):
        result = _run(tmp_path, "tail", experiment="toy_var", dims=[5], sizes=[2**16], alphas=[0.999],
                      methods=["single", "multi3"], train=DESK_TRAIN)
        (single,) = _by(result.records, "single", 0.999)
        (multi3,) = _by(result.records, "multi3", 0.999)
        assert multi3.rmse_norm < single.rmse_norm

    def test_crossing_rates(self, tmp_path):
        result = _run(tmp_path, "crossing", experiment="crossing", dims=[5], sizes=[2**16],
                      alphas=[0.995, 0.999], crossing_pairs=[[0.999, 0.995]], n_eval=2**16,
                      methods=["single", "multi1"], train=DESK_TRAIN)
        single = [r for r in _by(result.records, "single") if r.alpha is None][0]
        multi1 = [r for r in _by(result.records, "multi1") if r.alpha is None][0]
        assert multi1.crossing["0.999>0.995"] < 1e-3
        assert single.crossing["0.999>0.995"] > 1e-2


class TestTwinValidation:
    def test_zero_at_truth_and_shifted_alpha(self, toy_spec):
        alpha = 0.95
        shifted = alpha - 0.5 * (1.0 - alpha)
        twins = toy_generate(toy_spec, 2**17, np.random.default_rng(31), twins=True)
        q = lambda X: toy_var_es_closed(toy_spec, X, alpha)[0]  # noqa: E731
        s = lambda X: toy_var_es_closed(toy_spec, X, alpha)[1]  # noqa: E731
        p_err = pvalue_error_estimate(q, twins, alpha)
        es_err = es_error_proxy(q, s, twins, alpha)
        assert abs(p_err.inner) <= 4 * p_err.std_error
        assert abs(es_err.inner) <= 4 * es_err.std_error
        moved = pvalue_error_estimate(lambda X: toy_var_es_closed(toy_spec, X, shifted)[0], twins, alpha)
        assert abs(moved.inner - (alpha - shifted) ** 2) <= 4 * moved.std_error


class TestTwoStepEs:
    def test_fullnet_and_frozen_head(self, tmp_path):
        result = _run(tmp_path, "es", experiment="toy_es", dims=[5], sizes=[2**16], alphas=[0.95],
                      es_candidate="true", train=DESK_TRAIN)
        (full,) = _by(result.records, "es_fullnet", 0.95)
        (frozen,) = _by(result.records, "es_frozenlr", 0.95)
        assert full.rmse_norm < 0.15
        assert frozen.rmse_norm < 2 * full.rmse_norm
        assert frozen.wall_ms < 0.05 * full.wall_ms


class TestConvergenceRate:
    def test_log_log_slope(self, tmp_path):
        sizes = [2**k for k in range(12, 18)]
        result = _run(tmp_path, "rate", experiment="rate", dims=[5], sizes=sizes, runs=3, alphas=[0.95],
                      methods=["single"], train=DESK_TRAIN)
        slopes = [r.extra["slope"] for r in result.records if r.n == 0]
        assert len(slopes) == 3
        assert -0.35 <= float(np.mean(slopes)) <= -0.15


class TestNestedBenchmark:
    def test_linear_gaussian_portfolio(self):
        """Test p-value accuracy of the SA benchmark when each node's increment is Gaussian in the state."""
        states = np.random.default_rng(3).standard_normal((64, 2))
        means = states @ np.array([0.4, -1.2])
        stds = 0.5 + np.abs(states[:, 0])
        sampler = FunctionSampler(lambda i, rng, size: means[i] + stds[i] * rng.standard_normal(size), len(states))
        result = nested_var_sa(sampler, NestedMcConfig(n_inner=1024, K=256, alpha=0.95, seed=9))
        errors = np.abs(1.0 - norm_cdf((result.estimates - means) / stds) - 0.05)
        assert np.all(errors <= 0.5 * 0.05)


class TestInitialMargin:
    def test_learned_im_against_nested_benchmark(self, tmp_path):
        result = _run(tmp_path, "dim", experiment="dim", alphas=[0.9, 0.95], methods=["single"],
                      train={"epochs": 50, "batch_size": 512, "learning_rate": 0.005})
        for alpha in (0.9, 0.95):
            (rec,) = _by(result.records, "single", alpha)
            assert rec.rmse_norm < 0.35
            assert rec.extra["sawtooth_fraction"] >= 0.8
