import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from fpqe.tensor import ShapeError, Tensor, _unbroadcast, parameters_of

from _oracles import check_grads


def test_add_mul_chain_matches_fd(rng):
    check_grads(lambda a, b: ((a * b + a) * b).sum(), [rng.normal(size=(3, 4)), rng.normal(size=(3, 4))])


def test_broadcast_grads(rng):
    check_grads(lambda a, b: (a * b - b / (a * a + 1.0)).sum(), [rng.normal(size=(3, 4)), rng.normal(size=(4,))])


def test_div_pow_mean(rng):
    check_grads(lambda a, b: ((a / (b * b + 0.5)) ** 3).mean(), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))])


def test_sum_axis_reshape_getitem(rng):
    check_grads(lambda a: (a.sum(axis=1, keepdims=True) * a).reshape(-1)[1:5].sum(), [rng.normal(size=(3, 4))])


def test_repeated_use_accumulates():
    a = Tensor(np.array([2.0]), requires_grad=True)
    (a * a * a).sum().backward()
    assert np.allclose(a.grad, 12.0)


def test_non_scalar_backward_rejected():
    with pytest.raises(ShapeError):
        (Tensor(np.ones(3), requires_grad=True) * 2).backward()


def test_constants_get_no_grad():
    a = Tensor(np.ones(2), requires_grad=True)
    b = Tensor(np.ones(2))
    (a * b).sum().backward()
    assert b.grad is None and np.allclose(a.grad, 1.0)


def test_deep_chain_does_not_recurse():
    x = Tensor(np.array(1.0), requires_grad=True)
    y = x
    for _ in range(5000):
        y = y + 0.0
    y.backward()
    assert x.grad == 1.0


def test_parameters_of_keeps_trainable_only():
    a = Tensor(np.ones(1), requires_grad=True)
    assert parameters_of([a, Tensor(np.ones(1))]) == [a]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, array_shapes(min_dims=1, max_dims=3, max_side=4),
              elements=st.floats(-10, 10)))
def test_unbroadcast_inverts_broadcast(x):
    target = (1,) + x.shape[1:]
    g = _unbroadcast(x, target)
    assert g.shape == target
    assert np.allclose(g.sum(), x.sum())
