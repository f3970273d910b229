import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpqe import functional as F
from fpqe.tensor import ShapeError, Tensor

from _oracles import check_grads, conv2d_loops, conv_transpose2d_loops, max_pool_loops


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 0), (3, 2)])
def test_conv2d_matches_loops(rng, stride, pad):
    x = rng.normal(size=(2, 3, 7, 6))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride, pad).data
    assert np.allclose(out, conv2d_loops(x, w, b, stride, pad), atol=1e-12, rtol=0)


@pytest.mark.parametrize("stride,pad,op", [(1, 0, 0), (2, 1, 0), (2, 1, 1), (3, 1, 2)])
def test_conv_transpose_matches_loops(rng, stride, pad, op):
    x = rng.normal(size=(2, 3, 4, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=2)
    out = F.conv_transpose2d(Tensor(x), Tensor(w), Tensor(b), stride, pad, op).data
    assert np.allclose(out, conv_transpose2d_loops(x, w, b, stride, pad, op), atol=1e-12, rtol=0)


@pytest.mark.parametrize("stride,pad", [(1, 1), (2, 1), (2, 0)])
def test_conv_transpose_is_adjoint(rng, stride, pad):
    x = rng.normal(size=(2, 3, 8, 8))
    w = rng.normal(size=(4, 3, 3, 3))
    y_shape = F.conv2d(Tensor(x), Tensor(w), None, stride, pad).shape
    h_out = y_shape[-1]
    # output_padding recovers the exact input size when the forward pass floors
    op = 8 - F.conv_transpose_output_size(h_out, 3, stride, pad)
    y = rng.normal(size=y_shape)
    lhs = np.sum(F.conv2d(Tensor(x), Tensor(w), None, stride, pad).data * y)
    rhs = np.sum(x * F.conv_transpose2d(Tensor(y), Tensor(w), None, stride, pad, op).data)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_conv_grads(rng):
    check_grads(lambda x, w, b: (F.conv2d(x, w, b, 2, 1) ** 2).sum(),
                [rng.normal(size=(2, 2, 5, 5)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=3)])


def test_conv_transpose_grads(rng):
    check_grads(lambda x, w, b: (F.conv_transpose2d(x, w, b, 2, 1, 1) ** 2).sum(),
                [rng.normal(size=(2, 2, 3, 3)), rng.normal(size=(2, 3, 3, 3)), rng.normal(size=3)])


def test_single_image_keeps_rank(rng):
    out = F.conv2d(Tensor(rng.normal(size=(1, 5, 5))), Tensor(rng.normal(size=(2, 1, 3, 3))))
    assert out.shape == (2, 3, 3)


def test_conv_channel_mismatch():
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.zeros((1, 2, 5, 5))), Tensor(np.zeros((1, 3, 3, 3))))


def test_conv_transpose_bad_output_padding():
    with pytest.raises(ValueError):
        F.conv_transpose2d(Tensor(np.zeros((1, 1, 3, 3))), Tensor(np.zeros((1, 1, 3, 3))), stride=2, output_padding=2)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(4, 32), k=st.sampled_from([1, 3, 5]), s=st.integers(1, 3), p=st.integers(0, 2))
def test_output_size_formulas(n, k, s, p):
    if n + 2 * p < k:
        return
    x = Tensor(np.zeros((1, 1, n, n)))
    out = F.conv2d(x, Tensor(np.zeros((1, 1, k, k))), stride=s, padding=p)
    assert out.shape[-1] == F.conv_output_size(n, k, s, p) == (n + 2 * p - k) // s + 1
    up = F.conv_transpose2d(out, Tensor(np.zeros((1, 1, k, k))), stride=s, padding=p)
    assert up.shape[-1] == (out.shape[-1] - 1) * s - 2 * p + k


def test_max_pool_matches_loops_and_routes_to_first_max(rng):
    x = rng.normal(size=(2, 3, 6, 6))
    out = F.max_pool2d(Tensor(x), 2)
    assert np.allclose(out.data, max_pool_loops(x, 2, 2), atol=1e-12)
    tie = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    F.max_pool2d(tie, 2).sum().backward()
    assert np.array_equal(tie.grad[0, 0], [[1, 0], [0, 0]])


def test_max_pool_grads(rng):
    check_grads(lambda x: (F.max_pool2d(x, 2, 1) ** 2).sum(), [rng.normal(size=(1, 2, 4, 4))])


def test_batch_norm_train_moments_and_running_update(rng):
    x = rng.normal(3.0, 2.0, size=(8, 3, 4, 4))
    running = F.RunningStats.fresh(3)
    y = F.batch_norm2d(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), running, train=True).data
    assert np.allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-10)
    assert np.allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-3)
    m = 8 * 16
    assert np.allclose(running.mean, 0.1 * x.mean(axis=(0, 2, 3)))
    assert np.allclose(running.var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * m / (m - 1))


def test_batch_norm_eval_uses_running():
    running = F.RunningStats(np.array([1.0]), np.array([4.0]))
    y = F.batch_norm2d(Tensor(np.full((1, 1, 1, 1), 3.0)), Tensor(np.ones(1)), Tensor(np.zeros(1)),
                       running, train=False, eps=0.0)
    assert np.isclose(y.data.item(), 1.0)


def test_batch_norm_grads(rng):
    c = rng.normal(size=(2, 2, 3, 3))
    check_grads(lambda x, g, b: (F.batch_norm2d(x, g, b, train=True) * Tensor(c)).sum(),
                [rng.normal(size=(2, 2, 3, 3)), rng.normal(size=2), rng.normal(size=2)], tol=1e-5)


def test_relu_sigmoid_grads(rng):
    check_grads(lambda x: (F.sigmoid(F.relu(x) * 3.0) ** 2).sum(), [rng.normal(size=(4, 5))])


def test_sigmoid_is_stable():
    s = F.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]))).data
    assert np.all(np.isfinite(s)) and np.allclose(s, [0.0, 0.5, 1.0])


def test_l2_normalize(rng):
    check_grads(lambda x: (F.l2_normalize(x, axis=1) * Tensor(np.arange(4.0))).sum(), [rng.normal(size=(3, 4))])
    with pytest.raises(F.DegenerateInputError):
        F.l2_normalize(Tensor(np.zeros((2, 3))), axis=1)


def test_flatten():
    assert F.flatten(Tensor(np.zeros((8, 4, 4)))).shape == (8, 16)


def test_cross_entropy_value_and_grad(rng):
    z = rng.normal(size=(5, 3))
    y = np.array([0, 2, 1, 1, 0])
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    assert np.isclose(F.cross_entropy(Tensor(z), y).item(), -np.log(p[np.arange(5), y]).mean())
    check_grads(lambda t: F.cross_entropy(t, y), [z])
    big = F.cross_entropy(Tensor(np.array([[1000.0, 0.0]])), [0]).item()
    assert np.isfinite(big) and big < 1e-12
    with pytest.raises(ValueError):
        F.cross_entropy(Tensor(z), [0, 1, 2, 3, 4])


def test_mse_loss(rng):
    check_grads(lambda a, b: F.mse_loss(a, b), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))])
