"""Tensor op contracts: frozen values, oracles, and gradient checks."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from absagru import autodiff as ad
from absagru.errors import ConfigError, ContractError, ShapeError


def triple_loop_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


class TestMatmul:
    def test_identity(self):
        a = ad.constant([[1.0, 2.0], [3.0, 4.0]])
        out = ad.matmul(ad.constant(np.eye(2)), a)
        assert_array_equal(out.data, a.data)

    def test_projection(self):
        out = ad.matmul(ad.constant([[1.0, 0.0], [0.0, 0.0]]),
                        ad.constant([[5.0], [7.0]]))
        assert_array_equal(out.data, [[5.0], [0.0]])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-2, 2, (3, 4))
        b = rng.uniform(-2, 2, (4, 2))
        out = ad.matmul(ad.constant(a), ad.constant(b))
        assert_allclose(out.data, triple_loop_matmul(a, b), atol=1e-12,
                        rtol=0)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            ad.matmul(ad.constant(np.zeros((2, 3))),
                      ad.constant(np.zeros((2, 2))))

    def test_gradients(self):
        rng = np.random.default_rng(1)
        a = ad.parameter(rng.uniform(-2, 2, (3, 4)))
        b = ad.parameter(rng.uniform(-2, 2, (4, 2)))
        with ad.GradTape() as tape:
            loss = ad.sum_all(ad.matmul(a, b))
        tape.backward(loss)
        assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T, rtol=1e-12)
        assert_allclose(b.grad, a.data.T @ np.ones((3, 2)), rtol=1e-12)


class TestActivations:
    def test_sigmoid_values(self):
        x = ad.constant([0.0, 1.0, -50.0])
        out = ad.sigmoid(x).data
        assert out[0] == 0.5
        assert_allclose(out[1], 0.7310585786300049, rtol=1e-12)
        assert 0.0 < out[2] < 1e-21  # saturates without underflow errors

    def test_sigmoid_extreme_negative_is_finite(self):
        out = ad.sigmoid(ad.constant([-1000.0, 1000.0])).data
        assert np.all(np.isfinite(out))
        assert np.all((out >= 0.0) & (out <= 1.0))

    def test_tanh_values(self):
        out = ad.tanh_act(ad.constant([0.0, 1.0])).data
        assert out[0] == 0.0
        assert_allclose(out[1], 0.7615941559557649, rtol=1e-12)

    def test_tanh_odd_symmetry(self):
        x = np.random.default_rng(2).uniform(-3, 3, 17)
        assert_array_equal(ad.tanh_act(ad.constant(-x)).data,
                           -ad.tanh_act(ad.constant(x)).data)


class TestSoftmax:
    def test_uniform(self):
        assert_allclose(ad.softmax(ad.constant([1.0, 1.0, 1.0])).data,
                        np.full(3, 1 / 3), rtol=1e-15)

    def test_overflow_stability(self):
        out = ad.softmax(ad.constant([1000.0, 0.0])).data
        assert np.all(np.isfinite(out))
        assert_allclose(out[0], 1.0, rtol=1e-12)

    def test_reference_values(self):
        # e^x / sum(e^x) computed independently at x = [1, 2, 3]
        expected = np.exp([1.0, 2.0, 3.0]) / np.exp([1.0, 2.0, 3.0]).sum()
        assert_allclose(ad.softmax(ad.constant([1.0, 2.0, 3.0])).data,
                        expected, rtol=1e-12)
        assert_allclose(expected,
                        [0.09003057, 0.24472847, 0.66524096], atol=5e-9)

    def test_slices_sum_to_one_large_magnitude(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1e3, 1e3, (5, 7))
        out = ad.softmax(ad.constant(x), axis=1).data
        assert_allclose(out.sum(axis=1), np.ones(5), atol=1e-12)

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            ad.softmax(ad.constant([1.0, 2.0]), axis=2)


class TestBackward:
    def test_sum_gives_ones(self):
        x = ad.parameter(np.arange(6.0).reshape(2, 3))
        with ad.GradTape() as tape:
            loss = ad.sum_all(x)
        tape.backward(loss)
        assert_array_equal(x.grad, np.ones((2, 3)))

    def test_square_sum_gradient(self):
        x = ad.parameter([1.0, 2.0, 3.0])
        with ad.GradTape() as tape:
            loss = ad.sum_all(ad.mul(x, x))
        tape.backward(loss)
        assert_array_equal(x.grad, [2.0, 4.0, 6.0])

    def test_gradients_accumulate_across_uses(self):
        x = ad.parameter([2.0])
        with ad.GradTape() as tape:
            loss = ad.sum_all(ad.add(ad.mul(x, x), x))  # x^2 + x
        tape.backward(loss)
        assert_array_equal(x.grad, [5.0])

    def test_non_scalar_loss_rejected(self):
        x = ad.parameter([1.0, 2.0])
        with ad.GradTape() as tape:
            y = ad.mul(x, x)
        with pytest.raises(ContractError):
            tape.backward(y)

    def test_composed_graph_vs_finite_differences(self):
        rng = np.random.default_rng(4)
        w = ad.parameter(rng.uniform(-2, 2, (3, 3)))
        x = ad.parameter(rng.uniform(-2, 2, 3))

        def loss_fn():
            h = ad.tanh_act(ad.matmul(w, x))
            p = ad.log_softmax(h, axis=0)
            return ad.neg(ad.select(p, 1))

        with ad.GradTape() as tape:
            loss = loss_fn()
        tape.backward(loss)
        eps = 1e-5
        for t in (w, x):
            flat = t.data.reshape(-1)
            grad = t.grad.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + eps
                up = loss_fn().item()
                flat[i] = keep - eps
                down = loss_fn().item()
                flat[i] = keep
                numeric = (up - down) / (2 * eps)
                rel = abs(grad[i] - numeric) / max(abs(grad[i]),
                                                   abs(numeric), 1e-6)
                assert rel < 1e-4

    def test_unreachable_tensors_get_no_grad(self):
        x = ad.parameter([1.0])
        y = ad.parameter([1.0])
        with ad.GradTape() as tape:
            _unused = ad.mul(y, y)
            loss = ad.sum_all(x)
        tape.backward(loss)
        assert y.grad is None


class TestDeterminism:
    def test_identical_seed_identical_graph(self):
        def run():
            rng = np.random.default_rng(11)
            x = ad.parameter(rng.uniform(-1, 1, (4, 4)))
            with ad.GradTape() as tape:
                out = ad.dropout(ad.sigmoid(x), 0.3, True, rng)
                loss = ad.sum_all(out)
            tape.backward(loss)
            return loss.item(), x.grad.copy()

        l1, g1 = run()
        l2, g2 = run()
        assert l1 == l2
        assert_array_equal(g1, g2)


class TestDropout:
    def test_rate_zero_identity(self):
        x = ad.constant([1.0, 2.0])
        assert ad.dropout(x, 0.0, True, np.random.default_rng(0)) is x

    def test_inference_identity(self):
        x = ad.constant([1.0, 2.0])
        assert ad.dropout(x, 0.9, False) is x

    def test_invalid_rate(self):
        with pytest.raises(ConfigError):
            ad.dropout(ad.constant([1.0]), 1.0, True,
                       np.random.default_rng(0))

    def test_survivor_statistics(self):
        rng = np.random.default_rng(123)
        x = ad.constant(np.ones(100_000))
        out = ad.dropout(x, 0.5, True, rng).data
        survivors = np.count_nonzero(out) / out.size
        assert abs(survivors - 0.5) < 0.01
        assert abs(out.mean() - 1.0) < 0.01  # inverted scaling keeps mean

    def test_gradient_respects_mask(self):
        x = ad.parameter(np.ones(1000))
        with ad.GradTape() as tape:
            out = ad.dropout(x, 0.25, True, np.random.default_rng(5))
            loss = ad.sum_all(out)
        tape.backward(loss)
        assert_array_equal((x.grad != 0), (out.data != 0))


class TestClipGlobalNorm:
    def test_boundary_untouched(self):
        grads = {"g": np.array([3.0, 4.0])}
        ad.clip_global_norm(grads, 5.0)
        assert_array_equal(grads["g"], [3.0, 4.0])

    def test_scales_by_half(self):
        grads = {"g": np.array([6.0, 8.0])}
        ad.clip_global_norm(grads, 5.0)
        assert_allclose(grads["g"], [3.0, 4.0], rtol=1e-15)

    def test_multi_tensor_posterior_norm(self):
        # joint norm sqrt(16 + 128) = 12
        grads = {"a": np.full(4, 2.0), "b": np.full(8, -4.0)}
        assert ad.global_norm(grads) == pytest.approx(12.0)
        ad.clip_global_norm(grads, 5.0)
        assert ad.global_norm(grads) == pytest.approx(5.0, abs=1e-9)
        assert_allclose(grads["a"], np.full(4, 2.0 * 5 / 12), rtol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        grads = {k: rng.standard_normal(5) * 4 for k in "abc"}
        ad.clip_global_norm(grads, 2.0)
        once = {k: v.copy() for k, v in grads.items()}
        ad.clip_global_norm(grads, 2.0)
        for k in grads:
            assert_array_equal(grads[k], once[k])

    def test_invalid_norm(self):
        with pytest.raises(ConfigError):
            ad.clip_global_norm({"g": np.ones(2)}, 0.0)


class TestShapePlumbing:
    def test_concat_and_split_gradients(self):
        a = ad.parameter([1.0, 2.0])
        b = ad.parameter([3.0])
        with ad.GradTape() as tape:
            out = ad.concat([a, b])
            loss = ad.sum_all(ad.mul(out, ad.constant([1.0, 10.0, 100.0])))
        tape.backward(loss)
        assert_array_equal(a.grad, [1.0, 10.0])
        assert_array_equal(b.grad, [100.0])

    def test_take_rows_scatter_adds(self):
        m = ad.parameter(np.zeros((4, 2)))
        with ad.GradTape() as tape:
            out = ad.take_rows(m, [1, 1, 3])
            loss = ad.sum_all(out)
        tape.backward(loss)
        assert_array_equal(m.grad, [[0, 0], [2, 2], [0, 0], [1, 1]])

    def test_flip_rows_roundtrip(self):
        x = ad.constant(np.arange(6.0).reshape(3, 2))
        assert_array_equal(ad.flip_rows(ad.flip_rows(x)).data, x.data)

    def test_bias_broadcast_gradient(self):
        b = ad.parameter(np.zeros(3))
        x = ad.constant(np.ones((4, 3)))
        with ad.GradTape() as tape:
            loss = ad.sum_all(ad.add(x, b))
        tape.backward(loss)
        assert_array_equal(b.grad, [4.0, 4.0, 4.0])

    def test_tensor_invariants(self):
        t = ad.constant(np.zeros((2, 3)))
        assert t.data.size == np.prod(t.shape)
        x = ad.parameter(np.ones(3))
        with ad.GradTape() as tape:
            loss = ad.sum_all(x)
        tape.backward(loss)
        assert x.grad.shape == x.data.shape
