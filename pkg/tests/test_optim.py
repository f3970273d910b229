import numpy as np

from fpqe.optim import Adam, AdamState, adam_step
from fpqe.tensor import Tensor


def test_first_step_is_lr_times_sign(rng):
    p = rng.normal(size=5)
    g = rng.normal(size=5)
    st = AdamState.zeros_like(p, lr=0.1)
    new = adam_step(p.copy(), g, st)
    # m_hat = g, v_hat = g^2 after bias correction
    assert np.allclose(new, p - 0.1 * g / (np.abs(g) + 1e-8))


def test_matches_closed_form_for_constant_gradient():
    p = np.zeros(1)
    st = AdamState.zeros_like(p, lr=0.01)
    for _ in range(10):
        adam_step(p, np.array([2.0]), st)
    # constant g: m_hat = g and v_hat = g^2 at every step
    assert np.allclose(p, -10 * 0.01 * 2.0 / (2.0 + 1e-8))


def test_minimises_quadratic():
    x = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = Adam([x], lr=0.1)
    for _ in range(500):
        opt.zero_grad()
        ((x - Tensor(np.array([1.0, 1.0]))) ** 2).sum().backward()
        opt.step()
    assert np.allclose(x.data, [1.0, 1.0], atol=1e-3)
