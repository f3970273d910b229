"""Independent reference implementations used by the tests."""

import numpy as np

from fpqe.tensor import Tensor


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of scalar ``f`` at every entry of ``x`` (modified in place, then restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def check_grads(build, arrays, h=1e-6, tol=1e-6):
    """Compare backprop through ``build(*tensors)`` (a scalar Tensor) with central differences."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    build(*tensors).backward()
    for t in tensors:
        fd = numeric_grad(lambda: build(*[Tensor(u.data) for u in tensors]).item(), t.data, h)
        assert np.allclose(t.grad, fd, atol=tol, rtol=tol), np.abs(t.grad - fd).max()


def conv2d_loops(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for a in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0 if b is None else b[o]
                    for cc in range(ci):
                        for u in range(k):
                            for v in range(k):
                                acc += xp[a, cc, i * stride + u, j * stride + v] * w[o, cc, u, v]
                    out[a, o, i, j] = acc
    return out


def conv_transpose2d_loops(x, w, b, stride, pad, out_pad=0):
    """Scatter form: every input pixel stamps its kernel onto the output."""
    n, ci, h, wd = x.shape
    _, co, k, _ = w.shape
    ho = (h - 1) * stride - 2 * pad + k + out_pad
    wo = (wd - 1) * stride - 2 * pad + k + out_pad
    full = np.zeros((n, co, ho + 2 * pad + k, wo + 2 * pad + k))
    for a in range(n):
        for c in range(ci):
            for i in range(h):
                for j in range(wd):
                    for o in range(co):
                        for u in range(k):
                            for v in range(k):
                                full[a, o, i * stride + u, j * stride + v] += x[a, c, i, j] * w[c, o, u, v]
    out = full[:, :, pad:pad + ho, pad:pad + wo]
    if b is not None:
        out = out + b[None, :, None, None]
    return out


def max_pool_loops(x, k, stride):
    n, c, h, w = x.shape
    ho, wo = (h - k) // stride + 1, (w - k) // stride + 1
    out = np.zeros((n, c, ho, wo))
    for a in range(n):
        for cc in range(c):
            for i in range(ho):
                for j in range(wo):
                    out[a, cc, i, j] = x[a, cc, i * stride:i * stride + k, j * stride:j * stride + k].max()
    return out


def ssim_naive(x, y, win=11, sigma=1.5, data_range=1.0):
    """Per-window SSIM with explicit loops over every valid window position."""
    ax = np.arange(win) - (win - 1) / 2
    g = np.exp(-ax ** 2 / (2 * sigma ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    h, wd = x.shape
    vals = []
    for i in range(h - win + 1):
        for j in range(wd - win + 1):
            a = x[i:i + win, j:j + win]
            b = y[i:i + win, j:j + win]
            ma, mb = (w * a).sum(), (w * b).sum()
            va = (w * (a - ma) ** 2).sum()
            vb = (w * (b - mb) ** 2).sum()
            cov = (w * (a - ma) * (b - mb)).sum()
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def dense_gate(n, gate, qubits, theta=None):
    """Full 2**n x 2**n matrix by Kronecker products; qubit 0 is the most significant factor."""
    i2 = np.eye(2)
    if gate in ("RY", "RZ"):
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        u = np.array([[c, -s], [s, c]]) if gate == "RY" else np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
        out = np.array([[1.0]])
        for q in range(n):
            out = np.kron(out, u if q == qubits else i2)
        return out
    control, target = qubits
    p0, p1, x = np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]])
    a, b = np.array([[1.0]]), np.array([[1.0]])
    for q in range(n):
        a = np.kron(a, p0 if q == control else i2)
        b = np.kron(b, p1 if q == control else (x if q == target else i2))
    return a + b


def dense_pqc(angles):
    """Per depth: RY on every qubit, RZ on every qubit, then a CNOT ring (q, q+1 mod n)."""
    depth, n, _ = angles.shape
    u = np.eye(2 ** n, dtype=complex)
    for d in range(depth):
        for q in range(n):
            u = dense_gate(n, "RY", q, angles[d, q, 0]) @ u
        for q in range(n):
            u = dense_gate(n, "RZ", q, angles[d, q, 1]) @ u
        for q in range(n if n > 1 else 0):
            u = dense_gate(n, "CNOT", (q, (q + 1) % n)) @ u
    return u
