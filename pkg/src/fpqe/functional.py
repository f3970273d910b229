"""Differentiable operations used by the encoder-decoder and the loss functions.

Spatial ops accept either a single image ``(C, H, W)`` or a batch
``(N, C, H, W)``; the output keeps the same rank as the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, as_tensor


class DegenerateInputError(ValueError):
    pass


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.data.ndim == 3:
        return x.reshape(1, *x.shape), True
    if x.data.ndim != 4:
        raise ShapeError(f"expected (C,H,W) or (N,C,H,W), got {x.shape}")
    return x, False


def conv_output_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def conv_transpose_output_size(n: int, k: int, stride: int, padding: int,
                               output_padding: int = 0) -> int:
    return (n - 1) * stride - 2 * padding + k + output_padding


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Direct 2-D cross-correlation, ``weight`` laid out as ``(C_out, C_in, k, k)``."""
    x, squeeze = _batched(as_tensor(x))
    weight = as_tensor(weight)
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    n, c, h, w = x.shape
    c_out, c_in, kh, kw = weight.shape
    if c_in != c:
        raise ShapeError(f"conv2d: input has {c} channels but weight expects {c_in}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{w}")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    out = np.einsum("nchwuv,ocuv->nohw", win, weight.data, optimize=True)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None, None]
        parents.append(bias)

    def back(g):
        gw = np.einsum("nchwuv,nohw->ocuv", win, g, optimize=True)
        gxp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                gxp[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += np.einsum(
                    "nohw,oc->nchw", g, weight.data[:, :, u, v], optimize=True)
        gx = gxp[:, :, padding:padding + h, padding:padding + w]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    y = Tensor._from_op(out, parents, back)
    return y.reshape(y.shape[1:]) if squeeze else y


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
                     stride: int = 1, padding: int = 0, output_padding: int = 0) -> Tensor:
    """Transposed convolution, ``weight`` laid out as ``(C_in, C_out, k, k)``.

    This is the adjoint of :func:`conv2d` with the same weight array.
    ``output_padding`` adds rows/columns on the bottom/right so that a
    stride-2 layer can invert an odd-sized downsampling.
    """
    x, squeeze = _batched(as_tensor(x))
    weight = as_tensor(weight)
    if output_padding < 0 or (output_padding and output_padding >= stride):
        raise ValueError("output_padding must be non-negative and smaller than stride")
    n, c, h, w = x.shape
    c_in, c_out, kh, kw = weight.shape
    if c_in != c:
        raise ShapeError(f"conv_transpose2d: input has {c} channels but weight expects {c_in}")
    ho = conv_transpose_output_size(h, kh, stride, padding, output_padding)
    wo = conv_transpose_output_size(w, kw, stride, padding, output_padding)
    if ho < 1 or wo < 1:
        raise ShapeError("conv_transpose2d: padding leaves an empty output")
    full_h = max((h - 1) * stride + kh, padding + ho)
    full_w = max((w - 1) * stride + kw, padding + wo)

    full = np.zeros((n, c_out, full_h, full_w))
    for u in range(kh):
        for v in range(kw):
            full[:, :, u:u + stride * h:stride, v:v + stride * w:stride] += np.einsum(
                "nihw,io->nohw", x.data, weight.data[:, :, u, v], optimize=True)
    out = full[:, :, padding:padding + ho, padding:padding + wo].copy()
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[None, :, None, None]
        parents.append(bias)

    def back(g):
        gfull = np.zeros((n, c_out, full_h, full_w))
        gfull[:, :, padding:padding + ho, padding:padding + wo] = g
        win = sliding_window_view(gfull, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :h, :w]
        gx = np.einsum("nohwuv,iouv->nihw", win, weight.data, optimize=True)
        gw = np.einsum("nihw,nohwuv->iouv", x.data, win, optimize=True)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    y = Tensor._from_op(out, parents, back)
    return y.reshape(y.shape[1:]) if squeeze else y


@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1

    @classmethod
    def fresh(cls, channels: int, momentum: float = 0.1) -> "RunningStats":
        return cls(np.zeros(channels), np.ones(channels), momentum)


def batch_norm2d(x: Tensor, gamma: Tensor, beta: Tensor, running: RunningStats | None = None,
                 train: bool = True, eps: float = 1e-5) -> Tensor:
    """Per-channel batch normalization over the ``(N, H, W)`` axes.

    In train mode the batch statistics are used and ``running`` (if given)
    is updated in place with the unbiased batch variance.
    """
    x, squeeze = _batched(as_tensor(x))
    gamma, beta = as_tensor(gamma), as_tensor(beta)
    n, c, h, w = x.shape
    m = n * h * w
    if m < 1:
        raise ShapeError("batch_norm2d needs at least one element per channel")
    if train:
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        if running is not None:
            unbiased = var * m / (m - 1) if m > 1 else var
            running.mean = (1 - running.momentum) * running.mean + running.momentum * mu
            running.var = (1 - running.momentum) * running.var + running.momentum * unbiased
    else:
        if running is None:
            raise ValueError("eval-mode batch norm needs running statistics")
        mu, var = running.mean, running.var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None, None]) * inv[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def back(g):
        gg = (g * xhat).sum(axis=(0, 2, 3))
        gb = g.sum(axis=(0, 2, 3))
        gxhat = g * gamma.data[None, :, None, None]
        if train:
            gx = (inv[None, :, None, None] / m) * (
                m * gxhat
                - gxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
        else:
            gx = gxhat * inv[None, :, None, None]
        return gx, gg, gb

    y = Tensor._from_op(out, (x, gamma, beta), back)
    return y.reshape(y.shape[1:]) if squeeze else y


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    z = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return Tensor._from_op(s, (x,), lambda g: (g * s * (1.0 - s),))


def max_pool2d(x: Tensor, k: int, stride: int | None = None) -> Tensor:
    """Windowed max; the gradient goes to the first maximum in row-major order."""
    stride = k if stride is None else stride
    if k < 1 or stride < 1:
        raise ValueError("max_pool2d: kernel size and stride must be positive")
    x, squeeze = _batched(as_tensor(x))
    n, c, h, w = x.shape
    if h < k or w < k:
        raise ShapeError(f"max_pool2d: window {k} larger than input {h}x{w}")
    ho, wo = (h - k) // stride + 1, (w - k) // stride + 1
    win = sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    flat = win.reshape(n, c, ho, wo, k * k)
    arg = flat.argmax(axis=-1)  # argmax returns the first occurrence
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def back(g):
        gx = np.zeros_like(x.data)
        du, dv = np.divmod(arg, k)
        ni, ci, hi, wi = np.indices((n, c, ho, wo))
        np.add.at(gx, (ni, ci, hi * stride + du, wi * stride + dv), g)
        return (gx,)

    y = Tensor._from_op(out, (x,), back)
    return y.reshape(y.shape[1:]) if squeeze else y


def flatten(x: Tensor) -> Tensor:
    """``(c, h, w) -> (c, h*w)``; batched input keeps its leading axis."""
    x = as_tensor(x)
    return x.reshape(*x.shape[:-2], x.shape[-2] * x.shape[-1])


def l2_normalize(x: Tensor, axis: int | None = None, eps: float = 0.0) -> Tensor:
    """Scale to unit Euclidean norm, over the whole tensor or along ``axis``."""
    x = as_tensor(x)
    norm = np.sqrt((x.data ** 2).sum(axis=axis, keepdims=axis is not None))
    if np.any(norm <= eps):
        bad = np.argwhere(np.atleast_1d(norm.squeeze()) <= eps).ravel().tolist() if axis is not None else []
        raise DegenerateInputError(f"cannot normalize a zero vector{f' (rows {bad})' if bad else ''}")
    out = x.data / norm

    def back(g):
        dot = (g * out).sum(axis=axis, keepdims=axis is not None)
        return ((g - out * dot) / norm,)

    return Tensor._from_op(out, (x,), back)


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse_loss: shapes differ {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size

    def back(g):
        return 2.0 * g * diff / n, -2.0 * g * diff / n

    return Tensor._from_op(np.asarray((diff * diff).mean()), (a, b), back)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    logits = as_tensor(logits)
    if logits.data.ndim == 1:
        logits = logits.reshape(1, -1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, k = logits.shape
    if labels.shape[0] != n:
        raise ShapeError(f"cross_entropy: {n} rows but {labels.shape[0]} labels")
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"cross_entropy: labels must lie in [0, {k})")
    logp = log_softmax(logits.data)
    loss = -logp[np.arange(n), labels].mean()

    def back(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        return (g * p / n,)

    return Tensor._from_op(np.asarray(loss), (logits,), back)

