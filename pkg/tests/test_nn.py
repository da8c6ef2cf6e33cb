"""Core kernel tests: linear maps, activations, softmax, loss, Adam, and
the gradient checker itself."""

import math

import numpy as np
import pytest

from esalstm.nn import (
    Adam,
    Linear,
    Parameter,
    Sigmoid,
    Tanh,
    grad_check,
    mse_loss,
    sigmoid,
    softmax_rows,
)


def matmul_oracle(x, w):
    """Independent triple-loop matrix multiply."""
    n, d_in = x.shape
    _, d_out = w.shape
    out = np.zeros((n, d_out))
    for i in range(n):
        for j in range(d_out):
            for k in range(d_in):
                out[i, j] += x[i, k] * w[k, j]
    return out


class TestLinear:
    def test_identity_weights(self):
        lin = Linear(2, 2, np.random.default_rng(0))
        lin.W.value[...] = np.eye(2)
        lin.b.value[...] = 0.0
        np.testing.assert_array_equal(lin.forward(np.array([[1.0, 2.0]])), [[1.0, 2.0]])

    def test_zero_weights_pass_bias(self):
        lin = Linear(2, 2, np.random.default_rng(0))
        lin.W.value[...] = 0.0
        lin.b.value[...] = [3.0, 4.0]
        np.testing.assert_array_equal(lin.forward(np.array([[1.0, 2.0]])), [[3.0, 4.0]])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(42)
        lin = Linear(2, 2, rng)
        x = rng.standard_normal((3, 2))
        expected = matmul_oracle(x, lin.W.value) + lin.b.value
        np.testing.assert_allclose(lin.forward(x), expected, atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        lin = Linear(3, 2, np.random.default_rng(0))
        with pytest.raises(ValueError, match=r"\(1, 4\).*\(3, 2\)"):
            lin.forward(np.zeros((1, 4)))

    def test_backward_before_forward(self):
        lin = Linear(2, 2, np.random.default_rng(0))
        with pytest.raises(RuntimeError, match="before forward"):
            lin.backward(np.zeros((1, 2)))

    def test_zero_upstream_gradient(self):
        lin = Linear(2, 3, np.random.default_rng(1))
        lin.forward(np.ones((4, 2)))
        dx = lin.backward(np.zeros((4, 3)))
        np.testing.assert_array_equal(dx, 0.0)
        np.testing.assert_array_equal(lin.W.grad, 0.0)
        np.testing.assert_array_equal(lin.b.grad, 0.0)

    def test_identity_passes_gradient_through(self):
        lin = Linear(2, 2, np.random.default_rng(0))
        lin.W.value[...] = np.eye(2)
        lin.forward(np.array([[5.0, -1.0]]))
        dx = lin.backward(np.array([[1.0, 0.0]]))
        np.testing.assert_array_equal(dx, [[1.0, 0.0]])

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        lin = Linear(3, 2, rng)
        x = rng.standard_normal((4, 3))
        target = rng.standard_normal((4, 2))

        def loss_fn():
            lin.W.zero_grad()
            lin.b.zero_grad()
            y = lin.forward(x)
            loss, dy = mse_loss(y, target)
            lin.backward(dy)
            return loss

        assert grad_check(loss_fn, lin.params(), eps=1e-5) < 1e-6


class TestActivations:
    def test_sigmoid_values(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5
        np.testing.assert_allclose(sigmoid(np.array([math.log(3)]))[0], 0.75, atol=1e-15)

    def test_sigmoid_saturates_without_overflow(self):
        y = sigmoid(np.array([-1000.0, 1000.0]))
        assert y[0] == 0.0 and y[1] == 1.0

    def test_tanh_zero_and_derivative(self):
        act = Tanh()
        assert act.forward(np.array([[0.0]]))[0, 0] == 0.0
        # slope at 0 is 1, checked against central differences
        eps = 1e-6
        numeric = (np.tanh(eps) - np.tanh(-eps)) / (2 * eps)
        analytic = act.backward(np.array([[1.0]]))[0, 0]
        assert abs(analytic - numeric) < 1e-9

    def test_sigmoid_layer_backward_matches_fd(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 5))
        act = Sigmoid()
        y = act.forward(x)
        dy = rng.standard_normal(y.shape)
        dx = act.backward(dy)
        eps = 1e-6
        numeric = ((sigmoid(x + eps) - sigmoid(x - eps)) / (2 * eps)) * dy
        np.testing.assert_allclose(dx, numeric, atol=1e-8)


class TestSoftmax:
    def test_symmetric_row(self):
        np.testing.assert_allclose(softmax_rows(np.array([[1.0, 1.0, 1.0]])),
                                   [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    def test_analytic_row(self):
        np.testing.assert_allclose(softmax_rows(np.array([[0.0, math.log(2)]])),
                                   [[1 / 3, 2 / 3]], atol=1e-15)

    def test_single_element_row(self):
        np.testing.assert_array_equal(softmax_rows(np.array([[123.4]])), [[1.0]])

    def test_rows_are_distributions(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((50, 9)) * 30
        y = softmax_rows(x)
        np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(y >= 0.0) and np.all(y <= 1.0)

    def test_shift_invariance(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((20, 7))
        shifted = softmax_rows(x + 17.25)
        np.testing.assert_allclose(shifted, softmax_rows(x), atol=1e-12)


class TestMseLoss:
    def test_perfect_prediction(self):
        loss, grad = mse_loss(np.array([[1.0], [2.0]]), np.array([[1.0], [2.0]]))
        assert loss == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_analytic_value(self):
        loss, _ = mse_loss(np.array([[0.0], [0.0]]), np.array([[3.0], [4.0]]))
        assert loss == pytest.approx(12.5, abs=1e-15)

    def test_empty_batch(self):
        with pytest.raises(ValueError, match="empty"):
            mse_loss(np.empty((0, 1)), np.empty((0, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            mse_loss(np.zeros((2, 1)), np.zeros((3, 1)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        pred = rng.standard_normal((6, 1))
        target = rng.standard_normal((6, 1))
        _, grad = mse_loss(pred, target)
        eps = 1e-6
        for i in range(6):
            bumped = pred.copy()
            bumped[i, 0] += eps
            lp, _ = mse_loss(bumped, target)
            bumped[i, 0] -= 2 * eps
            lm, _ = mse_loss(bumped, target)
            numeric = (lp - lm) / (2 * eps)
            assert abs(grad[i, 0] - numeric) / max(abs(numeric), 1e-12) < 1e-8


class TestAdam:
    def test_zero_gradient_is_identity(self):
        p = Parameter(np.array([[1.0, -2.0]]), "p")
        opt = Adam([p], lr=0.1)
        before = p.value.copy()
        opt.step()
        np.testing.assert_array_equal(p.value, before)

    def test_first_step_scalar_oracle(self):
        # by hand: m1 = 0.1, v1 = 0.001, m_hat = 1, v_hat = 1,
        # update = -lr / (1 + eps) which is -0.1 to within 1e-8 relative
        p = Parameter(np.array([[0.0]]), "p")
        p.grad[...] = 1.0
        opt = Adam([p], lr=0.1)
        opt.step()
        assert p.value[0, 0] == pytest.approx(-0.1, rel=1e-7)
        np.testing.assert_array_equal(p.grad, 0.0)  # zeroed afterwards

    def test_constant_positive_gradient_decreases(self):
        p = Parameter(np.array([[5.0]]), "p")
        opt = Adam([p], lr=0.01)
        prev = p.value[0, 0]
        for _ in range(10):
            p.grad[...] = 1.0
            opt.step()
            assert p.value[0, 0] < prev
            prev = p.value[0, 0]

    def test_step_counter_increments(self):
        p = Parameter(np.zeros((1, 1)), "p")
        opt = Adam([p])
        for expected in (1, 2, 3):
            opt.step()
            assert opt.t == expected


class TestGradCheck:
    def test_linear_mse_model(self):
        rng = np.random.default_rng(9)
        lin = Linear(4, 3, rng)
        x = rng.standard_normal((5, 4))
        target = rng.standard_normal((5, 3))

        def loss_fn():
            for p in lin.params():
                p.zero_grad()
            loss, dy = mse_loss(lin.forward(x), target)
            lin.backward(dy)
            return loss

        assert grad_check(loss_fn, lin.params(), eps=1e-5) < 1e-6

    def test_detects_scaled_gradient(self):
        rng = np.random.default_rng(10)
        lin = Linear(3, 2, rng)
        x = rng.standard_normal((4, 3))
        target = rng.standard_normal((4, 2))

        def bad_loss_fn():
            for p in lin.params():
                p.zero_grad()
            loss, dy = mse_loss(lin.forward(x), target)
            lin.backward(dy)
            lin.W.grad *= 1.01   # deliberately wrong
            lin.b.grad *= 1.01
            return loss

        assert grad_check(bad_loss_fn, lin.params(), eps=1e-5) > 1e-3

    def test_constant_loss_reports_zero(self):
        p = Parameter(np.ones((2, 2)), "p")

        def const_loss():
            p.zero_grad()
            return 1.0

        assert grad_check(const_loss, [p], eps=1e-5) == 0.0

    def test_non_finite_loss_rejected(self):
        p = Parameter(np.ones((1, 1)), "p")
        with pytest.raises(ValueError, match="non-finite"):
            grad_check(lambda: float("nan"), [p])


class TestPurity:
    def test_forward_is_bit_deterministic(self):
        rng = np.random.default_rng(21)
        lin = Linear(6, 4, rng)
        x = rng.standard_normal((8, 6))
        y1 = lin.forward(x).copy()
        y2 = lin.forward(x)
        np.testing.assert_array_equal(y1, y2)
