import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointuq.errors import NonFiniteError, ShapeError, StaleCacheError
from jointuq.nn import (
    LayerSpec,
    Mlp,
    ParamGrads,
    backward,
    dense_stack,
    dropout_masks,
    forward,
    mlp_new,
    opt_new,
    sgd_step,
)
from oracles import central_diff, rel_err

ACTIVATIONS = ["tanh", "relu", "linear", "sigmoid", "softplus"]


def scalar_net(weight, bias, activation="linear"):
    return Mlp([LayerSpec(1, 1, activation)], [np.array([[weight]])], [np.array([bias])])


class TestLayerSpec:
    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ShapeError):
            LayerSpec(0, 3)

    def test_rejects_unknown_activation(self):
        with pytest.raises(ValueError):
            LayerSpec(1, 1, "gelu")

    def test_dense_stack_output_activation(self):
        specs = dense_stack(4, (10, 10), "tanh", "sigmoid")
        assert [s.activation for s in specs] == ["tanh", "tanh", "sigmoid"]
        assert [(s.in_dim, s.out_dim) for s in specs] == [(4, 10), (10, 10), (10, 1)]


class TestMlpNew:
    def test_parameter_count_two_hidden(self):
        net = mlp_new([LayerSpec(1, 10, "tanh"), LayerSpec(10, 10, "tanh"), LayerSpec(10, 1, "linear")], 0)
        assert net.n_params() == 141
        assert sum(w.size for w in net.weights) == 120
        assert sum(b.size for b in net.biases) == 21

    def test_parameter_count_single_layer(self):
        assert mlp_new([LayerSpec(2, 3, "relu")], 7).n_params() == 9

    def test_deterministic(self):
        specs = dense_stack(3, (5,), "tanh", "linear")
        a, b = mlp_new(specs, 11), mlp_new(specs, 11)
        for x, y in zip(a.params(), b.params()):
            np.testing.assert_array_equal(x, y)

    def test_different_seeds_differ(self):
        specs = dense_stack(3, (5,), "tanh", "linear")
        assert not np.array_equal(mlp_new(specs, 1).flat_params(), mlp_new(specs, 2).flat_params())

    def test_dims_must_chain(self):
        with pytest.raises(ShapeError):
            mlp_new([LayerSpec(1, 4), LayerSpec(5, 1)], 0)

    def test_empty_specs(self):
        with pytest.raises(ShapeError):
            mlp_new([], 0)

    def test_glorot_bounds_and_zero_bias(self):
        net = mlp_new([LayerSpec(30, 20, "tanh"), LayerSpec(20, 1)], 3)
        s = np.sqrt(6.0 / 50.0)
        assert np.all(np.abs(net.weights[0]) <= s)
        assert net.weights[0].std() == pytest.approx(s / np.sqrt(3.0), rel=0.1)
        assert all(np.all(b == 0) for b in net.biases)

    def test_weight_layout_out_by_in(self):
        net = mlp_new([LayerSpec(3, 2)], 0)
        assert net.weights[0].shape == (2, 3)


class TestForward:
    def test_zero_weights_give_zero(self):
        net = mlp_new(dense_stack(3, (4,), "tanh", "linear"), 0)
        for p in net.params():
            p[...] = 0.0
        out, _ = forward(net, np.array([1.0, -2.0, 3.0]))
        np.testing.assert_array_equal(out, [0.0])

    def test_affine(self):
        out, _ = forward(scalar_net(2.0, 1.0), np.array([3.0]))
        assert out[0] == 7.0

    def test_zero_dropout_train_equals_eval(self):
        net = mlp_new(dense_stack(2, (8, 8), "relu", "linear"), 4)
        x = np.random.default_rng(0).normal(size=(5, 2))
        a, _ = forward(net, x, "train", 0.0, np.random.default_rng(1))
        b, _ = forward(net, x, "eval")
        np.testing.assert_array_equal(a, b)

    def test_shapes(self):
        net = mlp_new(dense_stack(2, (8,), "relu", "linear"), 4)
        out1, _ = forward(net, np.zeros(2))
        out2, _ = forward(net, np.zeros((6, 2)))
        assert out1.shape == (1,)
        assert out2.shape == (6, 1)

    def test_width_mismatch(self):
        net = mlp_new(dense_stack(2, (3,), "relu", "linear"), 0)
        with pytest.raises(ShapeError):
            forward(net, np.zeros(3))

    def test_non_finite_input(self):
        net = mlp_new(dense_stack(2, (3,), "relu", "linear"), 0)
        with pytest.raises(NonFiniteError):
            forward(net, np.array([1.0, np.nan]))

    def test_quantifier_cache_stores_xi(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "sigmoid"), 0)
        x = np.array([[0.5, -0.2]])
        out, cache = forward(net, x)
        np.testing.assert_allclose(out[:, 0], 1.0 / (1.0 + np.exp(-cache.xi)), rtol=1e-15)

    def test_regressor_cache_has_no_xi(self):
        _, cache = forward(mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0), np.zeros(2))
        assert cache.xi is None

    def test_output_layer_never_dropped(self):
        net = mlp_new(dense_stack(2, (4,), "relu", "linear"), 0)
        masks = dropout_masks(net, 3, 0.5, np.random.default_rng(0))
        assert masks[-1] is None and masks[0].shape == (3, 4)

    def test_inverted_dropout_expectation(self):
        # Exact when the dropped layer feeds the linear output layer directly.
        net = mlp_new(dense_stack(2, (32,), "tanh", "linear"), 9)
        x = np.array([0.3, -0.7])
        n = 20000
        outs, _ = forward(net, np.tile(x, (n, 1)), "train", 0.4, np.random.default_rng(0))
        eval_out, _ = forward(net, x)
        se = outs[:, 0].std() / np.sqrt(n)
        assert abs(outs[:, 0].mean() - eval_out[0]) < 3 * se


class TestBackward:
    def _fd_check(self, net, x, out_grad):
        out, cache = forward(net, x)
        grads = backward(net, cache, out_grad)

        def objective():
            o, _ = forward(net, x)
            return float(np.sum(o * out_grad))

        for p, g in zip(net.params(), grads.arrays()):
            num = central_diff(objective, p)
            assert np.max(rel_err(g, num)) < 1e-5

    @pytest.mark.parametrize("act", ACTIVATIONS)
    def test_finite_differences(self, act):
        rng = np.random.default_rng(ACTIVATIONS.index(act))
        for seed in range(5):
            net = mlp_new(dense_stack(3, (6, 4), act, "linear"), seed)
            for p in net.params():
                p += rng.normal(scale=0.3, size=p.shape)
            self._fd_check(net, rng.normal(size=(4, 3)), rng.normal(size=(4, 1)))

    def test_mse_composed_1_10_1(self):
        net = mlp_new(dense_stack(1, (10,), "tanh", "linear"), 1)
        x, y = np.array([[0.4]]), 1.3
        out, cache = forward(net, x)
        grads = backward(net, cache, -2.0 * (y - out))

        def loss():
            o, _ = forward(net, x)
            return float((y - o[0, 0]) ** 2)

        for p, g in zip(net.params(), grads.arrays()):
            assert np.max(rel_err(g, central_diff(loss, p))) < 1e-5

    def test_zero_out_grad(self):
        net = mlp_new(dense_stack(2, (5,), "tanh", "linear"), 0)
        _, cache = forward(net, np.ones(2))
        assert all(np.all(g == 0) for g in backward(net, cache, np.zeros(1)).arrays())

    def test_linearity(self):
        net = mlp_new(dense_stack(2, (5,), "tanh", "linear"), 0)
        _, cache = forward(net, np.ones((3, 2)))
        g = np.array([[0.2], [-1.0], [0.7]])
        one = backward(net, cache, g).arrays()
        two = backward(net, cache, 2 * g).arrays()
        for a, b in zip(one, two):
            np.testing.assert_allclose(b, 2 * a, rtol=1e-15)

    def test_dropout_masks_honoured(self):
        rng = np.random.default_rng(2)
        net = mlp_new(dense_stack(2, (6, 6), "tanh", "linear"), 0)
        x = rng.normal(size=(3, 2))
        masks = dropout_masks(net, 3, 0.5, rng)
        g = rng.normal(size=(3, 1))
        _, cache = forward(net, x, "train", masks=masks)
        grads = backward(net, cache, g)

        def objective():
            o, _ = forward(net, x, "train", masks=masks)
            return float(np.sum(o * g))

        for p, gr in zip(net.params(), grads.arrays()):
            assert np.max(rel_err(gr, central_diff(objective, p))) < 1e-5

    def test_gradient_at_preactivation(self):
        net = mlp_new(dense_stack(2, (5,), "tanh", "softplus"), 3)
        x = np.array([[0.1, 0.9]])
        _, cache = forward(net, x)
        grads = backward(net, cache, np.ones((1, 1)), at_preactivation=True)

        def xi():
            _, c = forward(net, x)
            return float(c.xi[0])

        for p, g in zip(net.params(), grads.arrays()):
            assert np.max(rel_err(g, central_diff(xi, p))) < 1e-5

    def test_stale_cache_after_step(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        _, cache = forward(net, np.ones(2))
        grads = backward(net, cache, np.ones(1))
        sgd_step(net, grads, opt_new(net, 0.1))
        with pytest.raises(StaleCacheError):
            backward(net, cache, np.ones(1))

    def test_cache_from_other_net(self):
        a = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        b = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        _, cache = forward(a, np.ones(2))
        with pytest.raises(StaleCacheError):
            backward(b, cache, np.ones(1))

    def test_out_grad_shape(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        _, cache = forward(net, np.ones((4, 2)))
        with pytest.raises(ShapeError):
            backward(net, cache, np.ones((3, 1)))


class TestSgdStep:
    def _grads(self, net, value):
        return ParamGrads([np.full_like(w, value) for w in net.weights], [np.full_like(b, value) for b in net.biases])

    def test_plain_sgd_without_momentum(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        before = net.flat_params()
        sgd_step(net, self._grads(net, 0.5), opt_new(net, 0.1, momentum=0.0))
        np.testing.assert_allclose(net.flat_params(), before - 0.05, rtol=0, atol=1e-15)

    def test_zero_learning_rate(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        before = net.flat_params()
        opt = opt_new(net, 0.0)
        for _ in range(3):
            sgd_step(net, self._grads(net, 1.0), opt)
        np.testing.assert_array_equal(net.flat_params(), before)

    def test_quadratic_converges(self):
        net = scalar_net(1.0, 0.0)
        opt = opt_new(net, 0.1, momentum=0.9)
        for _ in range(200):
            theta = net.weights[0][0, 0]
            grads = ParamGrads([np.array([[2.0 * theta]])], [np.zeros(1)])
            sgd_step(net, grads, opt)
        assert abs(net.weights[0][0, 0]) < 1e-3

    def test_non_finite_gradient(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        with pytest.raises(NonFiniteError):
            sgd_step(net, self._grads(net, np.inf), opt_new(net, 0.1))

    def test_shape_mismatch(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        bad = ParamGrads([np.zeros((2, 2)), np.zeros((1, 3))], [np.zeros(3), np.zeros(1)])
        with pytest.raises(ShapeError):
            sgd_step(net, bad, opt_new(net, 0.1))

    def test_rejects_bad_momentum(self):
        net = mlp_new(dense_stack(2, (3,), "tanh", "linear"), 0)
        with pytest.raises(ValueError):
            opt_new(net, 0.1, momentum=1.0)

    @given(seed=st.integers(0, 10_000), steps=st.integers(1, 20))
    @settings(max_examples=20, deadline=None)
    def test_deterministic_trajectory(self, seed, steps):
        def run():
            rng = np.random.default_rng(seed)
            net = mlp_new(dense_stack(2, (4,), "tanh", "linear"), seed)
            opt = opt_new(net, 0.05)
            for _ in range(steps):
                x = rng.normal(size=(3, 2))
                out, cache = forward(net, x)
                sgd_step(net, backward(net, cache, out), opt)
            return net.flat_params()

        np.testing.assert_array_equal(run(), run())
