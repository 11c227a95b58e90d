"""
Unit tests for the network core: forward pass, reverse-mode gradients and the
alpha tangent, all checked against central finite differences.
"""
import numpy as np
import pytest

from src.riskquant.core.nn_core import (
    Activation,
    InterpGrid,
    LayerSpec,
    Network,
    backward,
    forward,
    forward_with_alpha_tangent,
    interp_head_eval,
    interp_weights,
    softplus,
    softplus_eval,
)
from src.riskquant.exceptions import DomainError, InputError, ShapeError

pytestmark = pytest.mark.unit

H = 1e-5
REL_TOL = 1e-5


def _random_net(rng: np.random.Generator) -> Network:
    d_in = int(rng.integers(1, 5))
    d_out = int(rng.integers(1, 3))
    hidden = int(rng.integers(0, 3))
    width = int(rng.integers(1, 6))
    net = Network.mlp(d_in, d_out, hidden, width, rng)
    # non-zero biases so every layer contributes
    return net.with_params([p + 0.3 * rng.standard_normal(p.shape) for p in net.params])


def _perturb(net: Network, direction, scale: float) -> Network:
    return net.with_params([p + scale * d for p, d in zip(net.params, direction)])


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


class TestSoftplus:
    def test_values(self):
        value, derivative = softplus(np.array([0.0, 50.0, -50.0]))
        np.testing.assert_allclose(value[0], np.log(2.0))
        assert value[1] == pytest.approx(50.0)
        assert value[2] == pytest.approx(np.exp(-50.0), rel=1e-9)
        np.testing.assert_allclose(derivative, [0.5, 1.0, np.exp(-50.0)], rtol=1e-9)

    def test_no_overflow(self):
        value, derivative = softplus(np.array([1000.0, -1000.0]))
        assert np.all(np.isfinite(value)) and np.all(np.isfinite(derivative))
        assert value[0] == 1000.0

    def test_scalar_eval(self):
        assert softplus_eval(0.0) == (pytest.approx(np.log(2.0)), pytest.approx(0.5))


class TestNetwork:
    def test_rejects_broken_chain(self):
        specs = [LayerSpec(2, 3), LayerSpec(4, 1, Activation.IDENTITY)]
        with pytest.raises(ShapeError):
            Network(specs, [np.zeros((3, 2)), np.zeros((1, 4))], [np.zeros(3), np.zeros(1)])

    def test_rejects_softplus_output(self):
        with pytest.raises(InputError):
            Network([LayerSpec(2, 1)], [np.zeros((1, 2))], [np.zeros(1)])

    def test_rejects_non_finite(self):
        with pytest.raises(InputError):
            Network([LayerSpec(1, 1, Activation.IDENTITY)], [np.array([[np.nan]])], [np.zeros(1)])

    def test_parameters_are_read_only(self, small_net):
        with pytest.raises(ValueError):
            small_net.weights[0][0, 0] = 1.0

    def test_linear_network(self):
        net = Network([LayerSpec(2, 1, Activation.IDENTITY)], [np.array([[2.0, -1.0]])], [np.array([0.5])])
        y, _ = forward(net, np.array([1.0, 3.0]))
        np.testing.assert_allclose(y, [2.0 - 3.0 + 0.5])

    def test_single_row_and_batch_agree(self, small_net, rng):
        X = rng.standard_normal((5, 3))
        batch = small_net(X)
        assert batch.shape == (5, 1)
        np.testing.assert_allclose(small_net(X[2]), batch[2])

    def test_input_shape_checked(self, small_net):
        with pytest.raises(ShapeError):
            small_net(np.zeros((2, 4)))

    def test_json_round_trip(self, small_net):
        assert Network.from_json(small_net.to_json()) == small_net

    def test_hidden_features(self, small_net, rng):
        X = rng.standard_normal((4, 3))
        feats = small_net.hidden_features(X)
        assert feats.shape == (4, 4)
        np.testing.assert_allclose(feats @ small_net.weights[-1].T + small_net.biases[-1], small_net(X))


class TestGradients:
    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            net = _random_net(rng)
            X = rng.standard_normal((3, net.input_dim))
            c = rng.standard_normal((3, net.output_dim))
            y, cache = forward(net, X)
            grads = backward(net, cache, c)

            direction = [rng.standard_normal(p.shape) for p in net.params]
            analytic = sum(float(np.sum(g * d)) for g, d in zip(grads.params, direction))
            f_plus = float(np.sum(c * _perturb(net, direction, H)(X)))
            f_minus = float(np.sum(c * _perturb(net, direction, -H)(X)))
            assert _close(analytic, (f_plus - f_minus) / (2 * H))

    def test_input_gradient(self, small_net, rng):
        x = rng.standard_normal(3)
        _, cache = forward(small_net, x)
        grads = backward(small_net, cache, np.ones(1))
        for k in range(3):
            e = np.zeros(3)
            e[k] = H
            fd = (small_net(x + e)[0] - small_net(x - e)[0]) / (2 * H)
            assert _close(grads.d_input[k], fd)

    def test_alpha_tangent_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            net = _random_net(rng)
            X = rng.standard_normal((3, net.input_dim))
            y, dy = forward_with_alpha_tangent(net, X)
            np.testing.assert_array_equal(y, net(X))
            e = np.zeros(net.input_dim)
            e[0] = H
            fd = (net(X + e) - net(X - e)) / (2 * H)
            for a, b in zip(dy.ravel(), fd.ravel()):
                assert _close(a, b)

    def test_backward_through_tangent(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            net = _random_net(rng)
            X = rng.standard_normal((3, net.input_dim))
            c = rng.standard_normal((3, net.output_dim))
            ct = rng.standard_normal((3, net.output_dim))
            _, _, cache = forward_with_alpha_tangent(net, X, return_cache=True)
            grads = backward(net, cache, c, d_tangent=ct)

            def objective(candidate: Network) -> float:
                y, dy = forward_with_alpha_tangent(candidate, X)
                return float(np.sum(c * y) + np.sum(ct * dy))

            direction = [rng.standard_normal(p.shape) for p in net.params]
            analytic = sum(float(np.sum(g * d)) for g, d in zip(grads.params, direction))
            fd = (objective(_perturb(net, direction, H)) - objective(_perturb(net, direction, -H))) / (2 * H)
            assert _close(analytic, fd)

    def test_tangent_cotangent_needs_tangent_cache(self, small_net, rng):
        _, cache = forward(small_net, rng.standard_normal((2, 3)))
        with pytest.raises(InputError):
            backward(small_net, cache, np.ones((2, 1)), d_tangent=np.ones((2, 1)))


class TestInterpolationHead:
    def test_weights_at_knots(self):
        grid = InterpGrid((0.9, 0.95, 0.99))
        c = interp_weights([0.9, 0.95, 0.97, 0.99], grid)
        np.testing.assert_allclose(c[:, 0], 1.0)
        np.testing.assert_allclose(c[0, 1:], [0.0, 0.0])
        np.testing.assert_allclose(c[1, 1:], [0.05, 0.0], atol=1e-15)
        np.testing.assert_allclose(c[2, 1:], [0.05, 0.02], atol=1e-15)
        np.testing.assert_allclose(c[3, 1:], [0.05, 0.04], atol=1e-15)

    def test_piecewise_linear_values(self):
        grid = InterpGrid((0.9, 0.95, 0.99))
        outputs = np.array([1.0, 10.0, 20.0])
        assert interp_head_eval(outputs, 0.9, grid) == pytest.approx(1.0)
        assert interp_head_eval(outputs, 0.95, grid) == pytest.approx(1.5)
        assert interp_head_eval(outputs, 0.99, grid) == pytest.approx(2.3)

    def test_outside_grid(self):
        with pytest.raises(DomainError):
            interp_weights(0.5, InterpGrid((0.9, 0.99)))

    def test_grid_validation(self):
        with pytest.raises(InputError):
            InterpGrid((0.9,))
        with pytest.raises(InputError):
            InterpGrid((0.95, 0.9))
        with pytest.raises(DomainError):
            InterpGrid((0.5, 1.0))

    def test_nonnegative_slopes_give_nondecreasing_values(self, rng):
        grid = InterpGrid((0.9, 0.93, 0.95, 0.975, 0.99))
        outputs = np.concatenate([rng.standard_normal(1), np.abs(rng.standard_normal(4))])
        outputs[2] = 0.0
        alphas = np.linspace(0.9, 0.99, 181)
        values = interp_head_eval(np.tile(outputs, (alphas.size, 1)), alphas, grid)
        assert np.all(np.diff(values) >= -1e-15)
