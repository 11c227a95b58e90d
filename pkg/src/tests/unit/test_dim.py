"""
Unit tests for the surrogate swap market and the initial margin pipeline.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from src.riskquant.core.optim import TrainConfig
from src.riskquant.dim import (
    ImLabelSet,
    MarketConfig,
    PathSet,
    SwapPortfolio,
    benchmark_im_nested,
    coupon_steps,
    im_labels,
    im_profile,
    learn_im_backward,
    learned_im_paths,
    par_rate,
    portfolio_value,
    resimulate_increments,
    sample_portfolio,
    sawtooth_fraction,
    simulate_paths,
    vasicek_mean,
    zcb_price,
)
from src.riskquant.exceptions import InputError, ShapeError
from src.riskquant.trainers import ArchitectureConfig
from src.riskquant.validation.nested import NestedMcConfig

pytestmark = pytest.mark.unit


@pytest.fixture
def market() -> MarketConfig:
    """Three years on a quarterly grid with a handful of swaps."""
    return MarketConfig(n_swaps=5, max_maturity=3, horizon_years=3.0, steps=12, seed=1)


@pytest.fixture
def flat_market() -> MarketConfig:
    return MarketConfig(n_swaps=5, max_maturity=3, horizon_years=3.0, steps=12, sigma_r=0.0, seed=1)


class TestMarketConfig:
    def test_defaults(self):
        cfg = MarketConfig()
        assert cfg.steps_per_year == 4
        assert cfg.dt == pytest.approx(0.25)
        assert cfg.delta_steps == 1
        assert cfg.times.shape == (41,)

    def test_coupon_dates_on_grid(self):
        with pytest.raises(ValidationError, match="steps / horizon_years"):
            MarketConfig(horizon_years=10.0, steps=25)

    def test_maturity_within_horizon(self):
        with pytest.raises(ValidationError, match="max_maturity"):
            MarketConfig(max_maturity=12, horizon_years=10.0)

    def test_delta_on_grid(self):
        assert MarketConfig(delta=0.5).delta_steps == 2
        with pytest.raises(ValidationError, match="delta"):
            MarketConfig(delta=0.3)


class TestPricing:
    def test_zcb_at_zero_maturity(self, market):
        np.testing.assert_allclose(zcb_price(np.array([0.01, 0.05]), 0.0, market), [1.0, 1.0])

    def test_zcb_without_volatility_at_long_run_rate(self):
        cfg = MarketConfig(sigma_r=0.0, theta=0.04)
        assert float(zcb_price(0.04, 2.0, cfg)) == pytest.approx(np.exp(-0.08), rel=1e-12)

    def test_zcb_decreases_in_rate(self, market):
        prices = zcb_price(np.array([0.0, 0.02, 0.05]), 5.0, market)
        assert np.all(np.diff(prices) < 0)

    def test_vasicek_mean(self, market):
        assert float(vasicek_mean(0.0, market)) == pytest.approx(market.r0)
        assert float(vasicek_mean(200.0, market)) == pytest.approx(market.theta, abs=1e-12)

    def test_par_swap_is_worth_zero(self, market):
        swap = SwapPortfolio(
            maturity=np.array([3]),
            fixed_rate=np.array([par_rate(3, market)]),
            notional=np.array([1.0]),
            direction=np.array([1.0]),
        )
        value = portfolio_value(swap, 0.0, market.r0, market.r0, market)
        assert float(value[0]) == pytest.approx(0.0, abs=1e-12)

    def test_expired_swaps_are_worth_zero(self, market):
        portfolio = sample_portfolio(market)
        np.testing.assert_array_equal(portfolio_value(portfolio, 3.0, np.array([0.01, 0.02]), 0.01, market), [0.0, 0.0])

    def test_sampled_portfolio(self, market):
        portfolio = sample_portfolio(market)
        assert portfolio.size == 5
        assert np.all((portfolio.maturity >= 1) & (portfolio.maturity <= 3))
        assert set(np.unique(portfolio.direction)) <= {-1.0, 1.0}
        again = sample_portfolio(market)
        np.testing.assert_array_equal(portfolio.fixed_rate, again.fixed_rate)
        assert list(portfolio.to_frame().columns) == ["maturity", "fixed_rate", "notional", "direction"]

    def test_portfolio_columns_must_align(self):
        with pytest.raises(ShapeError):
            SwapPortfolio(np.ones(2), np.ones(3), np.ones(2), np.ones(2))


class TestSimulation:
    def test_shapes_and_state_columns(self, market):
        paths = simulate_paths(market, 6)
        assert paths.states.shape == (6, 13, 3)
        assert paths.mtm.shape == (6, 13)
        np.testing.assert_allclose(paths.states[:, :, 1], np.broadcast_to(market.times, (6, 13)))
        np.testing.assert_array_equal(paths.states[:, 0, 0], market.r0)
        np.testing.assert_array_equal(paths.states[:, 0, 2], market.r0)

    def test_rate_fixing_follows_coupon_dates(self, market):
        paths = simulate_paths(market, 4)
        r, r_fix = paths.states[:, :, 0], paths.states[:, :, 2]
        np.testing.assert_array_equal(r_fix[:, 4], r[:, 4])
        np.testing.assert_array_equal(r_fix[:, 5], r[:, 4])
        np.testing.assert_array_equal(r_fix[:, 7], r[:, 4])
        np.testing.assert_array_equal(r_fix[:, 8], r[:, 8])

    def test_paths_are_regenerable(self, market):
        full = simulate_paths(market, 8)
        head = simulate_paths(market, 3)
        tail = simulate_paths(market, 4, path_offset=4)
        np.testing.assert_allclose(head.mtm, full.mtm[:3], rtol=1e-13, atol=0)
        np.testing.assert_allclose(tail.mtm, full.mtm[4:], rtol=1e-13, atol=0)
        assert tail.to_frame()["path"].min() == 4

    def test_until_step(self, market):
        paths = simulate_paths(market, 2, until_step=5)
        assert paths.mtm.shape == (2, 6)
        with pytest.raises(InputError):
            simulate_paths(market, 2, until_step=13)
        with pytest.raises(InputError):
            simulate_paths(market, 0)

    def test_flat_market_paths_agree(self, flat_market):
        paths = simulate_paths(flat_market, 3)
        np.testing.assert_allclose(paths.mtm[1], paths.mtm[0], rtol=0, atol=1e-15)

    def test_binary_round_trip(self, market, tmp_path):
        paths = simulate_paths(market, 3)
        restored = PathSet.from_binary(paths.to_binary(tmp_path / "paths.bin"))
        np.testing.assert_array_equal(restored.states, paths.states)
        np.testing.assert_array_equal(restored.mtm, paths.mtm)
        np.testing.assert_array_equal(restored.times, paths.times)
        assert restored.delta_steps == paths.delta_steps

    def test_binary_rejects_other_files(self, tmp_path):
        bogus = tmp_path / "bogus.bin"
        bogus.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(InputError):
            PathSet.from_binary(bogus)

    def test_csv_layout(self, market, tmp_path):
        paths = simulate_paths(market, 2)
        paths.to_csv(tmp_path / "paths.csv")
        header = (tmp_path / "paths.csv").read_text().splitlines()[0]
        assert header == "path,step,r,t,r_fix,mtm"

    def test_resimulation_window_must_fit(self, market):
        portfolio = sample_portfolio(market)
        with pytest.raises(InputError):
            resimulate_increments(portfolio, market, 0.02, 0.02, 12, np.random.default_rng(0), 10)


class TestLabels:
    def test_labels_are_mtm_increments(self, market):
        paths = simulate_paths(market, 5)
        labels = im_labels(paths)
        assert labels.n_steps == 12
        np.testing.assert_array_equal(labels.responses[:, 3], paths.mtm[:, 4] - paths.mtm[:, 3])
        np.testing.assert_array_equal(labels.features[:, 3, :], paths.states[:, 3, :])
        assert len(labels.step_dataset(0)) == 5

    def test_wider_window(self, market):
        labels = im_labels(simulate_paths(market, 2), delta_steps=4)
        assert labels.n_steps == 9
        with pytest.raises(InputError):
            im_labels(simulate_paths(market, 2), delta_steps=13)

    def test_coupon_steps(self, market):
        assert coupon_steps(market.times, 1) == [3, 7, 11]
        assert coupon_steps(market.times, 2) == [2, 3, 6, 7, 10]

    def test_sawtooth_fraction(self):
        assert sawtooth_fraction(np.array([3.0, 2.0, 1.0, 0.0]), [0, 1]) == 1.0
        assert sawtooth_fraction(np.array([0.0, 1.0, 2.0]), [0]) == 0.0
        assert np.isnan(sawtooth_fraction(np.array([1.0]), [0]))


class TestMarginLearning:
    def test_backward_learning(self, market):
        labels = im_labels(simulate_paths(market, 64))
        cfg = TrainConfig(epochs=2, batch_size=32, learning_rate=0.001, seed=5)
        models = learn_im_backward(labels, arch=ArchitectureConfig(hidden_layers=1, width=4), cfg=cfg)
        assert len(models.models) == labels.n_steps
        assert len(models.final_losses) == labels.n_steps
        im = learned_im_paths(models, labels, 0.95)
        assert im.shape == (64, labels.n_steps)
        assert np.isfinite(im).all()
        profile = im_profile(im, labels.times)
        assert list(profile.columns) == ["time", "mean", "p05", "p95"]
        assert np.all(profile["p05"] <= profile["p95"])

    def test_warm_start_is_deterministic(self, market):
        labels = im_labels(simulate_paths(market, 32))
        cfg = TrainConfig(epochs=1, batch_size=16, seed=5)
        arch = ArchitectureConfig(hidden_layers=1, width=4)
        a = learn_im_backward(labels, arch=arch, cfg=cfg)
        b = learn_im_backward(labels, arch=arch, cfg=cfg)
        assert all(x.net == y.net for x, y in zip(a.models, b.models))

    def test_warm_start_beats_cold_start(self, market):
        labels = im_labels(simulate_paths(market, 256))
        cfg = TrainConfig(epochs=2, batch_size=32, learning_rate=0.01, seed=5)
        arch = ArchitectureConfig(hidden_layers=1, width=4)
        warm = learn_im_backward(labels, arch=arch, cfg=cfg)
        cold = learn_im_backward(labels, arch=arch, cfg=cfg, warm_start=False)
        # the last step trains from the same initial weights either way
        assert warm.final_losses[-1] == cold.final_losses[-1]
        better = np.array(warm.final_losses[:-1]) < np.array(cold.final_losses[:-1])
        assert better.mean() >= 0.7

    def test_flat_market_learns_the_deterministic_increment(self, flat_market):
        labels = im_labels(simulate_paths(flat_market, 64))
        cfg = TrainConfig(epochs=20, batch_size=64, learning_rate=1e-4, seed=5)
        models = learn_im_backward(labels, arch=ArchitectureConfig(hidden_layers=0), cfg=cfg)
        im = learned_im_paths(models, labels, 0.95)
        np.testing.assert_allclose(im, labels.responses, atol=1e-2)

    def test_empty_labels(self):
        empty = ImLabelSet(
            steps=np.zeros(0, dtype=int),
            times=np.zeros(0),
            features=np.zeros((2, 0, 3)),
            responses=np.zeros((2, 0)),
            delta_steps=1,
        )
        with pytest.raises(InputError):
            learn_im_backward(empty)


class TestNestedBenchmark:
    def test_flat_market_benchmark_is_the_deterministic_increment(self, flat_market):
        portfolio = sample_portfolio(flat_market)
        nested = NestedMcConfig(n_inner=64, K=4, alpha=0.95, seed=2)
        bench = benchmark_im_nested(flat_market, 3, nested, step=3, portfolio=portfolio)
        paths = simulate_paths(flat_market, 1, portfolio=portfolio)
        expected = paths.mtm[0, 4] - paths.mtm[0, 3]
        np.testing.assert_allclose(bench.im, np.full(3, expected), rtol=1e-9, atol=1e-12)

    def test_benchmark_is_reproducible(self, market):
        portfolio = sample_portfolio(market)
        nested = NestedMcConfig(n_inner=128, K=8, alpha=0.9, seed=2)
        a = benchmark_im_nested(market, 4, nested, step=5, portfolio=portfolio)
        b = benchmark_im_nested(market, 4, nested, step=5, portfolio=portfolio)
        np.testing.assert_array_equal(a.im, b.im)
        assert a.states.shape == (4, 3)

    def test_step_must_leave_a_window(self, market):
        portfolio = sample_portfolio(market)
        with pytest.raises(InputError):
            benchmark_im_nested(market, 2, NestedMcConfig(), step=12, portfolio=portfolio)
