"""
Unit tests for response transforms, fitted model types and the learning schemes.

Fits use small linear or one-hidden-layer networks on a homoscedastic linear
model, Y = 2x + N(0, 1), so the true conditional VaR and ES are known in closed
form and each fit finishes quickly.
"""
import json

import numpy as np
import pytest

from src.riskquant.core.losses import es_increment_target
from src.riskquant.core.nn_core import InterpGrid, Network
from src.riskquant.core.optim import TrainConfig
from src.riskquant.exceptions import DomainError, InputError, ShapeError, UsageError
from src.riskquant.models.dataset import Dataset
from src.riskquant.oracles.normal import norm_pdf, norm_ppf
from src.riskquant.trainers import (
    AffineTransform,
    AlphaFeatureMap,
    AlphaMode,
    ArchitectureConfig,
    EsFitMode,
    EsInput,
    EsModel,
    FeatureScaler,
    TanhTransform,
    VarModel,
    fit_es_two_step,
    fit_joint,
    fit_var,
    fit_var_multi_continuum,
    fit_var_multi_interp,
    fit_var_single,
    load_model,
    model_from_dict,
    predict,
    save_model,
    upper_tail_grid,
)
from src.riskquant.trainers.fitting import alpha_crossing_penalty
from src.riskquant.trainers.transforms import IDENTITY, transform_from_dict

pytestmark = pytest.mark.unit

ALPHA = 0.9
LINEAR = ArchitectureConfig(hidden_layers=0)
SHALLOW = ArchitectureConfig(hidden_layers=1, width=8)
RIDGE = 1e-6
FAST = TrainConfig(epochs=5, batch_size=512, learning_rate=0.01, seed=3)


def _true_var(x):
    return 2.0 * np.ravel(x) + norm_ppf(ALPHA)


def _true_increment():
    u = norm_ppf(ALPHA)
    return norm_pdf(u) / (1.0 - ALPHA) - u


@pytest.fixture(scope="module")
def linear_data() -> Dataset:
    rng = np.random.default_rng(11)
    X = rng.uniform(-1.0, 1.0, size=(4096, 1))
    Y = 2.0 * X[:, 0] + rng.standard_normal(4096)
    return Dataset(X=X, Y=Y)


@pytest.fixture(scope="module")
def shallow_var(linear_data) -> VarModel:
    return fit_var_single(linear_data, ALPHA, SHALLOW, TrainConfig(epochs=20, batch_size=512, seed=1))


@pytest.fixture(scope="module")
def constant_response() -> Dataset:
    X = np.random.default_rng(5).uniform(-1.0, 1.0, size=(256, 1))
    return Dataset(X=X, Y=np.full(256, 0.5))


class TestTransforms:
    def test_affine_round_trip(self):
        t = AffineTransform(loc=1.5, scale=2.0)
        y = np.array([-1.0, 0.0, 3.0])
        np.testing.assert_allclose(t.inverse(t.forward(y)), y)

    def test_standardizing(self):
        t = AffineTransform.standardizing([1.0, 3.0])
        assert (t.loc, t.scale) == (2.0, 1.0)
        assert AffineTransform.standardizing([4.0, 4.0]).scale == 1.0

    def test_affine_needs_positive_scale(self):
        with pytest.raises(InputError):
            AffineTransform(scale=0.0)

    def test_tanh_is_increasing_and_inverts(self):
        t = TanhTransform(scale=3.0, loc=1.0)
        y = np.linspace(-5.0, 5.0, 11)
        assert np.all(np.diff(t.forward(y)) > 0)
        np.testing.assert_allclose(t.inverse(t.forward(y)), y, atol=1e-9)
        assert np.isfinite(t.inverse(np.array([1.0, -1.0]))).all()

    def test_from_dict(self):
        assert transform_from_dict({"kind": "identity"}) is IDENTITY
        assert transform_from_dict(AffineTransform(1.0, 2.0).to_dict()) == AffineTransform(1.0, 2.0)
        assert transform_from_dict(TanhTransform(2.0).to_dict()) == TanhTransform(2.0)
        with pytest.raises(InputError, match="Unknown transform"):
            transform_from_dict({"kind": "log"})

    def test_feature_scaler(self):
        X = np.array([[1.0, 5.0], [3.0, 5.0]])
        scaler = FeatureScaler.fit(X)
        np.testing.assert_allclose(scaler.apply(X), [[-1.0, 0.0], [1.0, 0.0]])
        restored = FeatureScaler.from_dict(scaler.to_dict())
        np.testing.assert_array_equal(restored.mean, scaler.mean)
        with pytest.raises(ShapeError):
            scaler.apply(np.zeros((2, 3)))
        with pytest.raises(InputError):
            FeatureScaler(mean=np.zeros(1), scale=np.zeros(1))


class TestModelTypes:
    def test_alpha_feature_map(self):
        fmap = AlphaFeatureMap(0.8, 0.99)
        np.testing.assert_allclose(fmap(np.array([0.8, 0.99])), [-1.0, 1.0])
        assert np.all(np.diff(fmap(np.linspace(0.8, 0.99, 20))) > 0)

    def test_alpha_feature_map_derivative(self):
        fmap = AlphaFeatureMap(0.8, 0.99)
        alphas = np.array([0.81, 0.9, 0.95, 0.985])
        h = 1e-6
        numeric = (fmap(alphas + h) - fmap(alphas - h)) / (2.0 * h)
        np.testing.assert_allclose(fmap.derivative(alphas), numeric, rtol=1e-6)

    def test_crossing_penalty_on_alpha_slope(self):
        fmap = AlphaFeatureMap(0.8, 0.99)
        alphas = np.array([0.82, 0.9, 0.97])
        scale = fmap.derivative(alphas)
        penalty, grad = alpha_crossing_penalty(-np.ones(3), alphas, fmap, 2.0)
        np.testing.assert_allclose(penalty, 2.0 * scale)
        np.testing.assert_allclose(grad, -2.0 * scale)
        penalty, grad = alpha_crossing_penalty(np.full(3, 0.5), alphas, fmap, 2.0)
        np.testing.assert_array_equal(penalty, 0.0)
        np.testing.assert_array_equal(grad, 0.0)

    def test_single_needs_alpha(self, rng):
        with pytest.raises(InputError):
            VarModel(AlphaMode.SINGLE, Network.mlp(2, 1, 1, 3, rng))
        with pytest.raises(DomainError):
            VarModel(AlphaMode.SINGLE, Network.mlp(2, 1, 1, 3, rng), alpha=1.5)

    def test_output_shape_checked(self, rng):
        with pytest.raises(ShapeError):
            VarModel(AlphaMode.SINGLE, Network.mlp(2, 2, 1, 3, rng), alpha=0.9)
        with pytest.raises(ShapeError):
            VarModel(AlphaMode.INTERP, Network.mlp(2, 2, 1, 3, rng), grid=InterpGrid((0.8, 0.9, 0.95)))

    def test_continuum_range_checked(self, rng):
        with pytest.raises(InputError):
            VarModel(AlphaMode.CONTINUUM, Network.mlp(3, 1, 1, 3, rng), alpha_range=(0.95, 0.9))
        with pytest.raises(ShapeError):
            VarModel(
                AlphaMode.CONTINUUM,
                Network.mlp(2, 1, 1, 3, rng),
                alpha_range=(0.9, 0.95),
                scaler=FeatureScaler.identity(2),
            )

    def test_single_row_returns_float(self, rng):
        model = VarModel(AlphaMode.SINGLE, Network.mlp(2, 1, 1, 3, rng), alpha=0.9)
        assert isinstance(model.predict(np.array([0.1, 0.2]), 0.9), float)
        assert model.predict(np.zeros((4, 2)), 0.9).shape == (4,)

    def test_uncovered_alpha(self, rng):
        model = VarModel(AlphaMode.SINGLE, Network.mlp(2, 1, 1, 3, rng), alpha=0.9)
        with pytest.raises(UsageError):
            predict(model, np.zeros(2), 0.95)

    def test_es_model_needs_scalar_output(self, rng):
        with pytest.raises(ShapeError):
            EsModel(var_model=lambda X: np.zeros(len(X)), alpha=0.9, increment_net=Network.mlp(2, 2, 0, 1, rng))

    def test_var_inputs_need_var_model(self, rng):
        with pytest.raises(InputError):
            EsModel(
                var_model=lambda X: np.zeros(len(X)),
                alpha=0.9,
                increment_net=Network.mlp(2, 1, 0, 1, rng),
                input_kind=EsInput.VAR_INPUTS,
            )

    def test_unknown_model_kind(self):
        with pytest.raises(InputError):
            model_from_dict({"kind": "cvar"})


class TestUpperTailGrid:
    def test_default_grid(self):
        grid = upper_tail_grid()
        assert grid.size == 21
        assert grid.low == pytest.approx(0.85)
        assert grid.high == pytest.approx(0.999)
        assert all(b > a for a, b in zip(grid.knots, grid.knots[1:]))

    def test_too_small(self):
        with pytest.raises(InputError):
            upper_tail_grid(1)


class TestVarFits:
    def test_linear_single_recovers_quantile(self, linear_data):
        cfg = TrainConfig(epochs=60, batch_size=512, learning_rate=0.05, seed=3)
        model = fit_var_single(linear_data, ALPHA, LINEAR, cfg)
        x = np.linspace(-0.9, 0.9, 19)[:, None]
        err = np.abs(model.predict(x, ALPHA) - _true_var(x))
        assert float(np.mean(err)) < 0.25
        assert len(model.history) == 60
        assert model.history[-1] < model.history[0]

    def test_fit_is_deterministic(self, linear_data):
        a = fit_var_single(linear_data, ALPHA, SHALLOW, FAST)
        b = fit_var_single(linear_data, ALPHA, SHALLOW, FAST)
        assert a.net == b.net
        assert a.history == b.history

    def test_seed_changes_fit(self, linear_data):
        a = fit_var_single(linear_data, ALPHA, SHALLOW, FAST)
        b = fit_var_single(linear_data, ALPHA, SHALLOW, FAST.model_copy(update={"seed": 4}))
        assert a.net != b.net

    def test_warm_start_shape_checked(self, linear_data, rng):
        with pytest.raises(ShapeError):
            fit_var_single(linear_data, ALPHA, SHALLOW, FAST, init_net=Network.mlp(3, 1, 1, 8, rng))

    def test_transformed_response(self, linear_data):
        model = fit_var_single(linear_data, ALPHA, SHALLOW, FAST, transform=TanhTransform(scale=4.0))
        assert np.isfinite(model.predict(linear_data.X[:50], ALPHA)).all()

    def test_continuum(self, linear_data):
        model = fit_var_multi_continuum(linear_data, (0.85, 0.95), lam=1.0, arch=SHALLOW, cfg=FAST)
        assert model.mode == AlphaMode.CONTINUUM
        assert model.net.input_dim == 2
        assert model.predict(linear_data.X[:10], 0.9).shape == (10,)
        assert model.covers([0.85, 0.95])
        with pytest.raises(UsageError):
            model.predict(linear_data.X[:10], 0.99)

    def test_continuum_rejects_bad_range(self, linear_data):
        with pytest.raises(InputError):
            fit_var_multi_continuum(linear_data, (0.95, 0.9))
        with pytest.raises(InputError):
            fit_var_multi_continuum(linear_data, (0.9, 0.95), lam=-1.0)

    def test_alpha_column_must_lie_in_range(self, linear_data):
        data = linear_data.with_alpha(np.full(len(linear_data), 0.5))
        with pytest.raises(InputError, match="alpha_col"):
            fit_var_multi_continuum(data, (0.85, 0.95), arch=SHALLOW, cfg=FAST)

    def test_interp(self, linear_data):
        grid = upper_tail_grid(5, first=0.05, last=0.2)
        model = fit_var_multi_interp(linear_data, grid, LINEAR, FAST)
        assert model.net.output_dim == 5
        assert model.predict(linear_data.X[:7], 0.9).shape == (7,)
        with pytest.raises(UsageError):
            model.predict(linear_data.X[:7], 0.99)

    def test_dispatch(self, linear_data):
        model = fit_var("multi2", linear_data, [0.9, 0.95], SHALLOW, FAST)
        assert model.alpha_range == (0.9, 0.95)
        assert fit_var("single", linear_data, [0.9], SHALLOW, FAST).alpha == 0.9
        with pytest.raises(InputError):
            fit_var("single", linear_data, [0.9, 0.95], SHALLOW, FAST)
        with pytest.raises(InputError, match="Unknown VaR method"):
            fit_var("multi9", linear_data, [0.9], SHALLOW, FAST)

    def test_constant_response_recovered(self, constant_response):
        net = None
        for lr in (0.02, 2e-3, 2e-4, 2e-5):
            cfg = TrainConfig(epochs=600, batch_size=256, learning_rate=lr, seed=3)
            model = fit_var_single(constant_response, ALPHA, LINEAR, cfg, init_net=net)
            net = model.net
        x = np.linspace(-1.0, 1.0, 21)[:, None]
        np.testing.assert_allclose(model.predict(x, ALPHA), 0.5, atol=1e-3)


class TestEsFits:
    def test_full_net_with_closed_form_candidate(self, linear_data):
        cfg = TrainConfig(epochs=60, batch_size=512, learning_rate=0.01, seed=2)
        model = fit_es_two_step(linear_data, _true_var, ALPHA, EsFitMode.FULL_NET, arch=LINEAR, cfg=cfg)
        x = np.linspace(-0.9, 0.9, 19)[:, None]
        assert float(np.mean(model.increment(x))) == pytest.approx(_true_increment(), abs=0.15)
        assert np.all(model.predict(x) >= _true_var(x))
        assert model.method == "es_fullnet"

    def test_frozen_lr_reuses_hidden_layers(self, linear_data, shallow_var):
        model = fit_es_two_step(linear_data, shallow_var, ALPHA, EsFitMode.FROZEN_LR, ridge=RIDGE)
        assert model.input_kind == EsInput.VAR_INPUTS
        assert model.method == "es_frozenlr"
        np.testing.assert_array_equal(model.increment_net.weights[0], shallow_var.net.weights[0])
        q = shallow_var.predict(linear_data.X, ALPHA)
        targets = es_increment_target(linear_data.Y, q, ALPHA)
        assert float(np.mean(model.increment(linear_data.X))) == pytest.approx(float(np.mean(targets)), abs=1e-4)

    def test_es_dominates_var(self, linear_data, shallow_var):
        model = fit_es_two_step(linear_data, shallow_var, ALPHA, EsFitMode.FROZEN_LR, ridge=RIDGE)
        X = linear_data.X[:200]
        assert np.all(model.predict(X, ALPHA) >= shallow_var.predict(X, ALPHA))

    def test_frozen_lr_needs_fitted_network(self, linear_data):
        with pytest.raises(InputError):
            fit_es_two_step(linear_data, _true_var, ALPHA, EsFitMode.FROZEN_LR)

    def test_candidate_must_cover_alpha(self, linear_data, shallow_var):
        with pytest.raises(UsageError):
            fit_es_two_step(linear_data, shallow_var, 0.95, EsFitMode.FROZEN_LR)

    def test_es_alpha_checked_at_prediction(self, linear_data, shallow_var):
        model = fit_es_two_step(linear_data, shallow_var, ALPHA, EsFitMode.FROZEN_LR, ridge=RIDGE)
        with pytest.raises(UsageError):
            model.predict(linear_data.X[:3], 0.95)

    def test_truncation_bound_checked(self, linear_data):
        with pytest.raises(InputError):
            fit_es_two_step(linear_data, _true_var, ALPHA, trunc=-1.0)

    def test_joint(self, linear_data):
        var_model, es_model = fit_joint(linear_data, ALPHA, arch=SHALLOW, cfg=FAST)
        X = linear_data.X[:100]
        assert var_model.alpha == ALPHA
        assert es_model.method == "joint"
        assert np.all(es_model.predict(X) >= var_model.predict(X, ALPHA))
        np.testing.assert_array_equal(es_model.increment_net.weights[0], var_model.net.weights[0])

    def test_joint_linear_network(self, linear_data):
        var_model, es_model = fit_joint(linear_data, ALPHA, arch=LINEAR, cfg=FAST)
        assert var_model.net.n_hidden == 0
        assert es_model.increment_net.output_dim == 1

    def test_joint_constant_response(self, constant_response):
        cfg = TrainConfig(epochs=6000, batch_size=256, learning_rate=5e-4, seed=3)
        var_model, es_model = fit_joint(constant_response, ALPHA, arch=LINEAR, cfg=cfg)
        x = np.linspace(-1.0, 1.0, 21)[:, None]
        np.testing.assert_allclose(var_model.predict(x, ALPHA), 0.5, atol=0.05)
        np.testing.assert_allclose(es_model.predict(x), 0.5, atol=0.05)

    def test_joint_needs_affine_transform(self, linear_data):
        with pytest.raises(InputError):
            fit_joint(linear_data, ALPHA, transform=TanhTransform())


class TestSerialization:
    def test_var_model_round_trip(self, linear_data, shallow_var):
        restored = model_from_dict(json.loads(shallow_var.to_json()))
        X = linear_data.X[:20]
        np.testing.assert_array_equal(restored.predict(X, ALPHA), shallow_var.predict(X, ALPHA))

    def test_interp_model_round_trip(self, linear_data):
        model = fit_var_multi_interp(linear_data, upper_tail_grid(4, 0.05, 0.2), LINEAR, FAST)
        restored = model_from_dict(json.loads(model.to_json()))
        assert restored.grid == model.grid
        np.testing.assert_array_equal(restored.predict(linear_data.X[:5], 0.9), model.predict(linear_data.X[:5], 0.9))

    def test_es_model_round_trip(self, linear_data, shallow_var, tmp_path):
        model = fit_es_two_step(linear_data, shallow_var, ALPHA, EsFitMode.FROZEN_LR, ridge=RIDGE)
        path = save_model(model, tmp_path / "models" / "es.json")
        restored = load_model(path)
        assert isinstance(restored, EsModel)
        X = linear_data.X[:20]
        np.testing.assert_array_equal(restored.predict(X, ALPHA), model.predict(X, ALPHA))

    def test_external_candidate_must_be_supplied(self, linear_data):
        model = fit_es_two_step(linear_data, _true_var, ALPHA, arch=LINEAR, cfg=FAST)
        data = json.loads(model.to_json())
        assert data["var_model"] is None
        with pytest.raises(InputError, match="candidate"):
            model_from_dict(data)
        restored = EsModel.from_dict(data, candidate=_true_var)
        X = linear_data.X[:5]
        np.testing.assert_array_equal(restored.predict(X), model.predict(X))
