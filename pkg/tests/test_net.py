import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gradsuite
from structnet.errors import ShapeError, StaleCacheError, ValidationError
from structnet.linalg import svd_values
from structnet.net import (
    Architecture,
    CorrectionNet,
    DenseLayer,
    Network,
    StructuredLayer,
    init_network,
    jacobian,
    layer_backward,
    layer_forward,
    mlp_hidden_for_budget,
    network_backward,
    network_forward,
)
from structnet.shaping import KINDS, DCTBand, DiagonalScale, Identity


def straight_line_phi(w1, b1, w2, b2, x):
    # scalar loops, no matrix products
    h = [math.tanh(sum(w1[i][j] * x[j] for j in range(len(x))) + b1[i]) for i in range(len(b1))]
    return [sum(w2[k][i] * h[i] for i in range(len(h))) + b2[k] for k in range(len(b2))]


def numeric_jacobian(f, x, h=1e-5):
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.column_stack(cols)


def linear_layer(w, op=None):
    op = op or Identity(*np.shape(w))
    return StructuredLayer(w, op, None)


class TestCorrectionNet:
    def test_zero_params(self, rng):
        c = CorrectionNet(np.zeros((4, 3)), np.zeros(4), np.zeros((2, 4)), np.zeros(2))
        assert np.array_equal(c.forward(rng.standard_normal(3))[0], np.zeros(2))

    def test_identity_at_origin(self):
        c = CorrectionNet(np.eye(2), np.zeros(2), np.eye(2), np.zeros(2))
        assert np.array_equal(c.forward(np.zeros(2))[0], np.zeros(2))

    def test_straight_line_oracle(self, rng):
        w1, b1 = rng.standard_normal((5, 3)), rng.standard_normal(5)
        w2, b2 = rng.standard_normal((3, 5)), rng.standard_normal(3)
        x = rng.standard_normal(3)
        y = CorrectionNet(w1, b1, w2, b2).forward(x)[0]
        ref = straight_line_phi(w1.tolist(), b1.tolist(), w2.tolist(), b2.tolist(), x.tolist())
        assert np.max(np.abs(y - ref)) < 1e-12

    def test_shape_chain(self):
        with pytest.raises(ShapeError):
            CorrectionNet(np.zeros((4, 3)), np.zeros(3), np.zeros((2, 4)), np.zeros(2))


class TestLayer:
    def test_identity_no_correction(self, rng):
        x = rng.standard_normal(4)
        assert np.array_equal(layer_forward(linear_layer(np.eye(4)), x)[0], x)

    def test_linear_equals_effective_map(self, rng):
        layer = StructuredLayer(rng.standard_normal((6, 4)), DCTBand.lowpass(6, 4), None)
        x = rng.standard_normal(4)
        eff = layer.effective_map()
        expected = [sum(eff[i, j] * x[j] for j in range(4)) for i in range(6)]
        np.testing.assert_allclose(layer.forward(x)[0], expected, atol=1e-14)

    def test_zero_init_correction(self, rng):
        net = init_network(Architecture((5, 5), shaping="dct_band"), seed=3)
        layer = net.layers[0]
        x = rng.standard_normal((7, 5))
        y, cache = layer.forward(x)
        assert np.array_equal(cache.correction, np.zeros((7, 5)))
        assert np.array_equal(y, x @ layer.effective_map().T)

    def test_batch_matches_single(self, rng):
        layer = gradsuite.random_layer("laplacian_smooth", 4, 5, rng)
        xs = rng.standard_normal((3, 4))
        batch = layer.forward(xs)[0]
        for i in range(3):
            np.testing.assert_allclose(layer.forward(xs[i])[0], batch[i], atol=1e-15)

    def test_backward_identity(self, rng):
        w = rng.standard_normal((3, 4))
        layer = linear_layer(w)
        dy = rng.standard_normal(3)
        dx, grads = layer_backward(layer, layer.forward(rng.standard_normal(4))[1], dy)
        np.testing.assert_allclose(dx, w.T @ dy, atol=1e-15)

    def test_zero_upstream(self, rng):
        layer = gradsuite.random_layer("learned_projection", 4, 4, rng)
        _, cache = layer.forward(rng.standard_normal(4))
        dx, grads = layer.backward(cache, np.zeros(4))
        assert not np.any(dx) and all(not np.any(g) for g in grads)

    def test_disabled_correction_has_zero_grads(self, rng):
        layer = gradsuite.random_layer("identity", 3, 3, rng, correction=False)
        _, cache = layer.forward(rng.standard_normal(3))
        _, grads = layer.backward(cache, rng.standard_normal(3))
        assert len(grads) == len(layer.params())
        assert all(not np.any(g) for g in grads[1:])

    def test_stale_cache(self, rng):
        layer = gradsuite.random_layer("identity", 3, 3, rng)
        _, cache = layer.forward(rng.standard_normal(3))
        layer.backward(cache, np.ones(3))
        with pytest.raises(StaleCacheError):
            layer.backward(cache, np.ones(3))
        other = gradsuite.random_layer("identity", 3, 3, rng)
        with pytest.raises(StaleCacheError):
            other.backward(layer.forward(np.ones(3))[1], np.ones(3))

    def test_input_width(self, rng):
        with pytest.raises(ShapeError):
            linear_layer(np.eye(3)).forward(np.ones(4))

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("outer", ["none", "tanh"])
    def test_layer_gradients(self, kind, outer):
        r = np.random.default_rng(5)
        layer = gradsuite.random_layer(kind, 4, 4, r, True, outer)
        g = r.standard_normal((2, 4))
        err = gradsuite.check_model(layer, r.standard_normal((2, 4)), lambda y: (np.sum(g * y), g))
        assert err < 1e-6


class TestNetwork:
    def test_single_identity(self, rng):
        x = rng.standard_normal(3)
        assert np.array_equal(Network([linear_layer(np.eye(3))])(x), x)

    def test_linear_composition(self, rng):
        a, b = rng.standard_normal((4, 3)), rng.standard_normal((2, 4))
        x = rng.standard_normal(3)
        np.testing.assert_allclose(Network([linear_layer(a), linear_layer(b)])(x), b @ a @ x, atol=1e-13)

    def test_forward_deterministic(self, rng):
        net = Network([gradsuite.random_layer("dct_band", 4, 4, rng) for _ in range(3)])
        x = rng.standard_normal(4)
        assert np.array_equal(net(x), net(x))

    def test_dim_chain(self):
        with pytest.raises(ShapeError):
            Network([linear_layer(np.eye(3)), linear_layer(np.eye(4))])

    def test_single_layer_backward_matches_layer(self, rng):
        layer = gradsuite.random_layer("low_rank", 4, 4, rng)
        x, dy = rng.standard_normal((2, 4))
        a = layer.backward(layer.forward(x)[1], dy)
        net = Network([layer])
        b = network_backward(net, network_forward(net, x)[1], dy)
        assert np.array_equal(a[0], b[0])
        assert all(np.array_equal(p, q) for p, q in zip(a[1], b[1]))

    def test_registry_names(self, rng):
        net = Network([gradsuite.random_layer("learned_projection", 3, 3, rng),
                       gradsuite.random_layer("identity", 3, 2, rng)])
        names = [n for n, _ in net.params()]
        assert names == ["0.W", "0.P", "0.w1", "0.b1", "0.w2", "0.b2",
                         "1.W", "1.w1", "1.b1", "1.w2", "1.b2"]

    def test_wrong_cache_count(self, rng):
        net = Network([linear_layer(np.eye(2))])
        with pytest.raises(StaleCacheError):
            net.backward([], np.ones(2))


class TestJacobian:
    def test_linear_layer(self, rng):
        layer = StructuredLayer(rng.standard_normal((4, 4)), DCTBand.lowpass(4, 4), None)
        assert np.array_equal(jacobian(layer, rng.standard_normal(4)), layer.effective_map())

    def test_tanh_at_zero(self, rng):
        w1 = rng.standard_normal((3, 3))
        w2 = rng.standard_normal((3, 3))
        layer = StructuredLayer(rng.standard_normal((3, 3)), Identity(3, 3),
                                CorrectionNet(w1, np.zeros(3), w2, np.zeros(3)))
        np.testing.assert_allclose(jacobian(layer, np.zeros(3)), layer.effective_map() + w2 @ w1, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_net_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        kinds = ["dct_band", "laplacian_smooth", "learned_projection"]
        net = Network([gradsuite.random_layer(k, 5, 5, r, True, o) for k, o in zip(kinds, ["tanh", "none", "tanh"])])
        x = r.standard_normal(5)
        assert np.max(np.abs(net.jacobian(x) - numeric_jacobian(net, x))) < 1e-6

    def test_dense_relu(self, rng):
        layer = DenseLayer(rng.standard_normal((4, 3)), rng.standard_normal(4), "relu")
        x = rng.standard_normal(3)
        np.testing.assert_allclose(layer.jacobian(x), numeric_jacobian(lambda v: layer.forward(v)[0], x), atol=1e-8)


class TestInit:
    def test_same_seed(self):
        a = init_network(Architecture((8, 8, 8), shaping="sparsity_mask"), 4)
        b = init_network(Architecture((8, 8, 8), shaping="sparsity_mask"), 4)
        assert all(np.array_equal(p, q) for (_, p), (_, q) in zip(a.params(), b.params()))

    @pytest.mark.parametrize("kind", KINDS)
    def test_spectral_cap(self, kind):
        net = init_network(Architecture((12, 9, 12), shaping=kind), 1)
        for layer in net.layers:
            assert svd_values(layer.effective_map())[0] <= 0.95 + 1e-6

    def test_correction_output_zero(self, rng):
        net = init_network(Architecture((6, 6)), 0)
        _, caches = net.forward(rng.standard_normal((10, 6)))
        assert not np.any(caches[0].correction)

    def test_mlp(self):
        net = init_network(Architecture((4, 16, 4), model="mlp"), 0)
        assert [l.activation for l in net.layers] == ["relu", "none"]

    def test_bad_dims(self):
        with pytest.raises(ValidationError):
            init_network(Architecture((4,)), 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 64), st.integers(2, 64), st.integers(10, 20000))
    def test_budget_is_closest(self, d_in, d_out, budget):
        h = mlp_hidden_for_budget(d_in, d_out, budget)
        count = lambda k: k * (d_in + d_out + 1) + d_out
        cands = [k for k in (h - 1, h + 1) if k >= 1]
        assert all(abs(count(h) - budget) <= abs(count(k) - budget) for k in cands)


def test_lipschitz_bound_is_upper_bound(rng):
    net = Network([gradsuite.random_layer("dct_band", 5, 5, rng) for _ in range(2)])
    bound = net.lipschitz_bound()
    for _ in range(20):
        x, z = rng.standard_normal((2, 5))
        assert np.linalg.norm(net(x + z) - net(x)) <= bound * np.linalg.norm(z) + 1e-12
