import numpy as np
import pytest

from shiftnas.errors import ShapeError
from shiftnas.nncore import (
    DenseParams,
    LayerSpec,
    accuracy,
    chain_backward,
    chain_forward,
    glorot_dense,
    layer_backward,
    layer_forward,
    sgd_step,
    softmax_cross_entropy,
)


def finite_diff_grads(spec, params, x, grad_out, eps=1e-5):
    """Central-difference oracle for dL/dW, dL/db, dL/dx where
    L = sum(forward(...) * grad_out)."""

    def loss(p, xx):
        y, _ = layer_forward(spec, p, xx)
        return float((y * grad_out).sum())

    gW = np.zeros_like(params.W)
    for idx in np.ndindex(*params.W.shape):
        for sign, target in ((1, gW),):
            p_hi = DenseParams(params.W.copy(), params.b.copy())
            p_lo = DenseParams(params.W.copy(), params.b.copy())
            p_hi.W[idx] += eps
            p_lo.W[idx] -= eps
            target[idx] = (loss(p_hi, x) - loss(p_lo, x)) / (2 * eps)
    gb = np.zeros_like(params.b)
    for i in range(len(params.b)):
        p_hi = DenseParams(params.W.copy(), params.b.copy())
        p_lo = DenseParams(params.W.copy(), params.b.copy())
        p_hi.b[i] += eps
        p_lo.b[i] -= eps
        gb[i] = (loss(p_hi, x) - loss(p_lo, x)) / (2 * eps)
    gx = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        x_hi = x.copy()
        x_lo = x.copy()
        x_hi[idx] += eps
        x_lo[idx] -= eps
        gx[idx] = (loss(params, x_hi) - loss(params, x_lo)) / (2 * eps)
    return gx, gW, gb


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / denom


class TestLayerForward:
    def test_identity_passthrough(self):
        spec = LayerSpec("identity", 2, 2)
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        y, cache = layer_forward(spec, None, x)
        assert np.array_equal(y, x)
        assert cache is None

    def test_dense_identity_weights(self):
        spec = LayerSpec("dense", 2, 2, "none")
        params = DenseParams(np.eye(2), np.zeros(2))
        y, _ = layer_forward(spec, params, np.array([[5.0, -1.0]]))
        assert np.array_equal(y, np.array([[5.0, -1.0]]))

    def test_dense_relu_hand_value(self):
        # relu(-2*1 + 1*1 + 0.5) = relu(-0.5) = 0, checked by dot-product oracle
        spec = LayerSpec("dense", 2, 1, "relu")
        params = DenseParams(np.array([[1.0], [1.0]]), np.array([0.5]))
        x = np.array([[-2.0, 1.0]])
        oracle = max(0.0, float(np.dot(x[0], params.W[:, 0]) + params.b[0]))
        y, _ = layer_forward(spec, params, x)
        assert y[0, 0] == pytest.approx(oracle)
        assert y[0, 0] == 0.0

    def test_shape_mismatch_reports_dims(self):
        spec = LayerSpec("dense", 3, 2, "none")
        params = DenseParams(np.zeros((3, 2)), np.zeros(2))
        with pytest.raises(ShapeError, match="in_dim=3"):
            layer_forward(spec, params, np.zeros((1, 4)))
        with pytest.raises(ShapeError, match="does not match spec"):
            layer_forward(spec, DenseParams(np.zeros((2, 2)), np.zeros(2)), np.zeros((1, 3)))

    def test_identity_spec_validation(self):
        with pytest.raises(ShapeError):
            LayerSpec("identity", 2, 3)
        with pytest.raises(ShapeError):
            LayerSpec("identity", 2, 2, "relu")


class TestLayerBackward:
    def test_identity_grad_passthrough(self):
        spec = LayerSpec("identity", 3, 3)
        g = np.arange(6.0).reshape(2, 3)
        grad_in, grad_params = layer_backward(spec, None, None, g)
        assert np.array_equal(grad_in, g)
        assert grad_params is None

    def test_linear_grad_w_is_xt_g(self):
        spec = LayerSpec("dense", 2, 2, "none")
        params = DenseParams(np.array([[0.3, -0.2], [0.1, 0.4]]), np.zeros(2))
        x = np.array([[1.5, -0.7]])
        _, cache = layer_forward(spec, params, x)
        g = np.array([[0.2, -1.1]])
        _, grads = layer_backward(spec, params, cache, g)
        assert np.allclose(grads.W, x.T @ g)
        assert np.allclose(grads.b, g[0])

    @pytest.mark.parametrize("activation", ["none", "relu", "tanh"])
    def test_matches_finite_differences(self, activation):
        rng = np.random.default_rng(42)
        for trial in range(10):
            n, din, dout = rng.integers(1, 5), rng.integers(1, 6), rng.integers(1, 6)
            spec = LayerSpec("dense", int(din), int(dout), activation)
            params = glorot_dense(spec.in_dim, spec.out_dim, rng)
            params.b[:] = rng.normal(0, 0.3, size=spec.out_dim)
            x = rng.normal(0, 1.0, size=(n, spec.in_dim))
            grad_out = rng.normal(0, 1.0, size=(n, spec.out_dim))
            y, cache = layer_forward(spec, params, x)
            grad_in, grads = layer_backward(spec, params, cache, grad_out)
            fd_x, fd_W, fd_b = finite_diff_grads(spec, params, x, grad_out)
            assert rel_err(grad_in, fd_x) < 1e-5
            assert rel_err(grads.W, fd_W) < 1e-5
            assert rel_err(grads.b, fd_b) < 1e-5

    def test_grad_shape_mismatch(self):
        spec = LayerSpec("dense", 2, 3, "none")
        params = DenseParams(np.zeros((2, 3)), np.zeros(3))
        _, cache = layer_forward(spec, params, np.zeros((1, 2)))
        with pytest.raises(ShapeError):
            layer_backward(spec, params, cache, np.zeros((1, 2)))


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_is_log_k(self):
        logits = np.zeros((3, 4))
        loss, _ = softmax_cross_entropy(logits, [0, 1, 3])
        assert loss == pytest.approx(np.log(4.0), abs=1e-12)

    def test_confident_correct_is_near_zero(self):
        logits = np.zeros((1, 5))
        logits[0, 2] = 100.0
        loss, _ = softmax_cross_entropy(logits, [2])
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_scalar_oracle_value(self):
        # -log(e^2 / (e^1 + e^2)) = log(1 + e^-1)
        loss, _ = softmax_cross_entropy(np.array([[1.0, 2.0]]), [1])
        assert loss == pytest.approx(np.log(1 + np.exp(-1.0)), abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(0, 2, size=(6, 5))
        labels = rng.integers(0, 5, size=6)
        loss_a, grad_a = softmax_cross_entropy(logits, labels)
        loss_b, grad_b = softmax_cross_entropy(logits + 123.456, labels)
        assert abs(loss_a - loss_b) < 1e-12
        assert np.allclose(grad_a, grad_b, atol=1e-12)

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(0, 1, size=(4, 3))
        labels = rng.integers(0, 3, size=4)
        _, grad = softmax_cross_entropy(logits, labels)
        eps = 1e-6
        for idx in np.ndindex(*logits.shape):
            hi = logits.copy()
            lo = logits.copy()
            hi[idx] += eps
            lo[idx] -= eps
            fd = (
                softmax_cross_entropy(hi, labels)[0]
                - softmax_cross_entropy(lo, labels)[0]
            ) / (2 * eps)
            assert grad[idx] == pytest.approx(fd, abs=1e-8)

    def test_empty_batch_rejected(self):
        with pytest.raises(ShapeError, match="empty"):
            softmax_cross_entropy(np.zeros((0, 3)), [])

    def test_bad_label_rejected(self):
        with pytest.raises(ShapeError):
            softmax_cross_entropy(np.zeros((1, 3)), [3])


class TestSgdStep:
    def test_zero_lr_is_identity(self):
        p = DenseParams(np.array([[1.0]]), np.array([2.0]))
        g = DenseParams(np.array([[5.0]]), np.array([-3.0]))
        out = sgd_step(p, g, 0.0)
        assert np.array_equal(out.W, p.W)
        assert np.array_equal(out.b, p.b)

    def test_one_step_arithmetic(self):
        p = DenseParams(np.array([[1.0]]), np.zeros(1))
        g = DenseParams(np.array([[2.0]]), np.zeros(1))
        out = sgd_step(p, g, 0.5)
        assert out.W[0, 0] == 0.0

    def test_two_steps_equal_summed_gradient(self):
        rng = np.random.default_rng(11)
        p = DenseParams(rng.normal(size=(3, 2)), rng.normal(size=2))
        g1 = DenseParams(rng.normal(size=(3, 2)), rng.normal(size=2))
        g2 = DenseParams(rng.normal(size=(3, 2)), rng.normal(size=2))
        lr = 0.1
        seq = sgd_step(sgd_step(p, g1, lr), g2, lr)
        summed = sgd_step(p, DenseParams(g1.W + g2.W, g1.b + g2.b), lr)
        assert np.allclose(seq.W, summed.W, atol=1e-12)
        assert np.allclose(seq.b, summed.b, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            sgd_step(
                DenseParams(np.zeros((2, 2)), np.zeros(2)),
                DenseParams(np.zeros((2, 3)), np.zeros(3)),
                0.1,
            )


class TestChain:
    def test_chain_matches_manual_composition(self):
        rng = np.random.default_rng(21)
        specs = [
            LayerSpec("dense", 4, 3, "relu"),
            LayerSpec("identity", 3, 3),
            LayerSpec("dense", 3, 2, "none"),
        ]
        params = [glorot_dense(4, 3, rng), None, glorot_dense(3, 2, rng)]
        x = rng.normal(size=(5, 4))
        y, caches = chain_forward(specs, params, x)
        y0, _ = layer_forward(specs[0], params[0], x)
        y2, _ = layer_forward(specs[2], params[2], y0)
        assert np.allclose(y, y2)
        grad_out = rng.normal(size=(5, 2))
        grad_x, grads = chain_backward(specs, params, caches, grad_out)
        assert grads[1] is None
        assert grad_x.shape == x.shape

    def test_determinism(self):
        rng = np.random.default_rng(4)
        spec = LayerSpec("dense", 3, 3, "tanh")
        params = glorot_dense(3, 3, rng)
        x = rng.normal(size=(2, 3))
        y1, _ = layer_forward(spec, params, x)
        y2, _ = layer_forward(spec, params, x)
        assert np.array_equal(y1, y2)


def test_accuracy_counts_argmax_matches():
    logits = np.array([[1.0, 2.0], [3.0, 0.5], [0.0, 0.1]])
    assert accuracy(logits, [1, 0, 0]) == pytest.approx(2 / 3)
