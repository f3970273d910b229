"""Layered quantum classifier built from amplitude-encoded channels.

Layer l holds one ansatz per channel.  Each channel register is prepared by
amplitude encoding, run through its circuit, and read out with Pauli-Z
expectations.  The readouts of layer l are split into contiguous groups,
zero-padded to a power of two and renormalised to become the channel
registers of layer l+1.  The first ``n_classes`` readouts of the last layer
are the logits.

Angle gradients use the two-term parameter-shift rule on each layer's
readouts; the classical glue between layers (grouping, normalisation, and
the dependence of a readout on its input amplitudes) is differentiated
analytically and chained with the shift-rule Jacobians.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import fpqt
from .functional import DegenerateInputError, cross_entropy
from .optim import AdamState, adam_step
from .quantum import (
    PqcParams,
    expectations,
    n_qubits_for,
    pqc_adjoint,
    pqc_forward,
    readout_observables,
    _ring_perm,
    ry_real,
    z_phases,
)
from .tensor import Tensor

log = logging.getLogger(__name__)

SHIFT = np.pi / 2


class DegenerateStateError(DegenerateInputError):
    pass


class ChannelPlanError(ValueError):
    pass


@dataclass
class QnnLayer:
    angles: np.ndarray  # (channels, depth, n_qubits, 2)
    readout: str = "z0"

    @property
    def channels(self) -> int:
        return self.angles.shape[0]

    @property
    def depth(self) -> int:
        return self.angles.shape[1]

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[2]

    @property
    def outputs_per_channel(self) -> int:
        return readout_observables(self.n_qubits, self.readout).shape[0]

    @property
    def outputs(self) -> int:
        return self.channels * self.outputs_per_channel

    def pqc(self, k: int) -> PqcParams:
        return PqcParams(self.angles[k])


@dataclass
class QnnModel:
    layers: list[QnnLayer]
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def n_params(self) -> int:
        return sum(layer.angles.size for layer in self.layers)

    def channel_plan(self) -> list[int]:
        return [layer.channels for layer in self.layers]

    def group_size(self, l: int) -> int:
        return math.ceil(self.layers[l - 1].outputs / self.layers[l].channels)

    def validate(self) -> None:
        if not self.layers:
            raise ChannelPlanError("a QNN needs at least one layer")
        for l in range(1, len(self.layers)):
            m, c = self.layers[l - 1].outputs, self.layers[l].channels
            g = self.group_size(l)
            if (c - 1) * g >= m:
                raise ChannelPlanError(f"layer {l}: {m} inputs cannot fill {c} channels")
            need = max(1, n_qubits_for(_pow2_at_least(g, 2)))
            if self.layers[l].n_qubits != need:
                raise ChannelPlanError(f"layer {l}: groups of {g} need {need} qubits, "
                                       f"layer has {self.layers[l].n_qubits}")
        if self.layers[-1].outputs < self.n_classes:
            raise ChannelPlanError(f"last layer measures {self.layers[-1].outputs} values, "
                                   f"fewer than {self.n_classes} classes")

    def get_params(self) -> list[np.ndarray]:
        return [layer.angles for layer in self.layers]

    def copy(self) -> "QnnModel":
        return QnnModel([QnnLayer(l.angles.copy(), l.readout) for l in self.layers],
                        self.n_classes, self.seed)


def _pow2_at_least(n: int, floor: int = 1) -> int:
    n = max(n, floor)
    return 1 << (n - 1).bit_length()


def build_qnn(n_channels: int, n_qubits: int, n_classes: int = 2, layers: int = 2,
              depth: int = 2, readout: str = "z0", seed: int = 0,
              init_scale: float = np.pi) -> QnnModel:
    """Channel plan: ``n_channels`` registers first, ``n_classes`` registers last.

    A first layer with too few readouts (to feed the next layer, or to supply
    the logits when it is the only layer) measures every qubit instead.  Intermediate layers use
    ``max(n_classes, m // 4)`` channels for ``m`` incoming readouts.
    """
    rng = np.random.default_rng(seed)
    specs: list[tuple[int, int, str]] = []
    first_readout = readout
    needed = 2 * n_classes if layers > 1 else n_classes
    if n_channels * readout_observables(n_qubits, readout).shape[0] < needed:
        first_readout = "zall"
    specs.append((n_channels, n_qubits, first_readout))
    m = n_channels * readout_observables(n_qubits, first_readout).shape[0]
    for l in range(1, layers):
        c = n_classes if l == layers - 1 else max(n_classes, m // 4)
        g = math.ceil(m / c)
        n = n_qubits_for(_pow2_at_least(g, 2))
        specs.append((c, n, readout))
        m = c * readout_observables(n, readout).shape[0]
    qlayers = [QnnLayer(rng.uniform(-init_scale, init_scale, size=(c, depth, n, 2)), r)
               for c, n, r in specs]
    return QnnModel(qlayers, n_classes, seed)


# forward ---------------------------------------------------------------------

@dataclass
class _Trace:
    inputs: list[np.ndarray] = field(default_factory=list)   # (B, c, 2^n) registers per layer
    outputs: list[np.ndarray] = field(default_factory=list)  # after the circuit
    norms: list[np.ndarray] = field(default_factory=list)    # pre-normalisation norms, layers >= 1
    readouts: list[np.ndarray] = field(default_factory=list)  # (B, outputs)


def _regroup(phi: np.ndarray, layer: QnnLayer, group: int) -> tuple[np.ndarray, np.ndarray]:
    b, m = phi.shape
    c, width = layer.channels, 2 ** layer.n_qubits
    padded = np.zeros((b, c * group))
    padded[:, :m] = phi
    u = np.zeros((b, c, width))
    u[:, :, :group] = padded.reshape(b, c, group)
    norms = np.sqrt((u * u).sum(axis=-1))
    if np.any(norms == 0.0):
        s, k = np.argwhere(norms == 0.0)[0]
        raise DegenerateStateError(f"sample {s}: channel group {k} is all zeros, cannot renormalise")
    return u / norms[..., None], norms


def _check_input(model: QnnModel, psi: np.ndarray) -> np.ndarray:
    first = model.layers[0]
    if psi.ndim != 3 or psi.shape[1] != first.channels or psi.shape[2] != 2 ** first.n_qubits:
        raise ChannelPlanError(f"input shape {psi.shape[1:]} does not match the first layer "
                               f"({first.channels} channels of {2 ** first.n_qubits} amplitudes)")
    norms = np.sqrt((np.abs(psi) ** 2).sum(axis=-1))
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise DegenerateStateError("input channel rows must have unit norm")
    return psi


def _forward(model: QnnModel, psi: np.ndarray, keep: bool) -> tuple[np.ndarray, _Trace | None]:
    trace = _Trace() if keep else None
    states = psi
    phi = None
    for l, layer in enumerate(model.layers):
        if l > 0:
            states, norms = _regroup(phi, layer, model.group_size(l))
            if keep:
                trace.norms.append(norms)
        out = pqc_forward(states, layer.angles[None])
        e = expectations(out, layer.readout)
        phi = e.reshape(e.shape[0], -1)
        if keep:
            trace.inputs.append(states)
            trace.outputs.append(out)
            trace.readouts.append(phi)
    return phi[:, :model.n_classes], trace


def qnn_forward(model: QnnModel, psi: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Logits for one sample ``(c, 2^n)`` -> ``(K,)`` or a batch ``(B, c, 2^n)`` -> ``(B, K)``."""
    psi = np.asarray(psi)
    single = psi.ndim == 2
    if single:
        psi = psi[None]
    _check_input(model, psi)
    parts = [_forward(model, psi[s:s + chunk], keep=False)[0] for s in range(0, len(psi), chunk)]
    logits = np.concatenate(parts) if parts else np.zeros((0, model.n_classes))
    return logits[0] if single else logits


def layer_readouts(model: QnnModel, psi: np.ndarray) -> list[np.ndarray]:
    """Measured vector of every layer, each ``(B, outputs)``."""
    psi = np.asarray(psi)
    if psi.ndim == 2:
        psi = psi[None]
    _check_input(model, psi)
    return _forward(model, psi, keep=True)[1].readouts


def predict(model: QnnModel, psi: np.ndarray) -> np.ndarray | int:
    """argmax of the logits; ``np.argmax`` already breaks ties toward the lower index."""
    logits = qnn_forward(model, psi)
    if logits.ndim == 1:
        return int(np.argmax(logits))
    return np.argmax(logits, axis=1)


# gradients -------------------------------------------------------------------

def _shift_jacobian(states: np.ndarray, layer: QnnLayer) -> np.ndarray:
    """d(readout)/d(angle) by the parameter-shift rule, shape ``(B, c, P, r)``.

    All 2P shifted circuits share the unshifted prefix, so each pair of
    branches is spawned from the running state at its gate and only the
    suffix is simulated per branch.
    """
    c, depth, n, _ = layer.angles.shape
    p = depth * n * 2
    b = states.shape[0]
    theta = layer.angles[..., 0]                      # (c, depth, n)
    phi = layer.angles[..., 1]
    ring = _ring_perm(n)
    signs = np.array([SHIFT, -SHIFT])
    cur = np.asarray(states, dtype=np.complex128)      # (B, c, W)
    branches = np.empty((2 * p, b, c, 2 ** n), dtype=np.complex128)  # branch axis first keeps prefixes contiguous
    slot_param = np.empty(2 * p, dtype=np.int64)       # flat angle index of each branch pair
    alive = 0

    def spawn(new: np.ndarray, param: int) -> None:
        nonlocal alive
        branches[alive:alive + 2] = new
        slot_param[alive:alive + 2] = param
        alive += 2

    for d in range(depth):
        for q in range(n):
            if alive:
                branches[:alive] = ry_real(branches[:alive], q, theta[:, d, q], n)
            spawn(ry_real(cur[None], q, theta[:, d, q] + signs[:, None, None], n), (d * n + q) * 2)
            cur = ry_real(cur, q, theta[:, d, q], n)
        diag = z_phases(phi[:, d], n)                  # (c, W)
        branches[:alive] *= diag
        for q in range(n):
            shifted = phi[:, d] + np.eye(n)[q] * signs[:, None, None]  # (2, c, n)
            spawn(cur[None] * z_phases(shifted, n)[:, None], (d * n + q) * 2 + 1)
        cur = cur * diag
        if n > 1:
            branches[:alive] = branches[:alive][..., ring]
            cur = cur[..., ring]
    e = expectations(branches, layer.readout)          # (2P, B, c, r)
    jac = np.empty((b, c, p, e.shape[-1]))
    jac[:, :, slot_param[0::2]] = 0.5 * (e[0::2] - e[1::2]).transpose(1, 2, 0, 3)
    return jac


def _backprop(model: QnnModel, trace: _Trace, g_logits: np.ndarray) -> list[np.ndarray]:
    b = g_logits.shape[0]
    grads: list[np.ndarray] = [None] * len(model.layers)  # type: ignore[list-item]
    g_phi = np.zeros((b, model.layers[-1].outputs))
    g_phi[:, :model.n_classes] = g_logits
    for l in reversed(range(len(model.layers))):
        layer = model.layers[l]
        r = layer.outputs_per_channel
        g_e = g_phi.reshape(b, layer.channels, r)
        jac = _shift_jacobian(trace.inputs[l], layer)
        grads[l] = np.einsum("bcpr,bcr->cp", jac, g_e).reshape(layer.angles.shape)
        if l == 0:
            break
        # readout_r = <s| U^T O_r U |s> for a real register s, so its gradient
        # in s is 2 Re(U^dag O_r U s)
        obs = readout_observables(layer.n_qubits, layer.readout)
        weighted = (g_e @ obs) * trace.outputs[l]
        g_s = 2.0 * np.real(pqc_adjoint(weighted, layer.angles[None]))
        s = trace.inputs[l]
        g_u = (g_s - s * (g_s * s).sum(axis=-1, keepdims=True)) / trace.norms[l - 1][..., None]
        group = model.group_size(l)
        prev = model.layers[l - 1].outputs
        g_phi = g_u[:, :, :group].reshape(b, -1)[:, :prev]
    return grads


def parameter_shift_grad(model: QnnModel, psi: np.ndarray,
                         loss_fn: Callable[[Tensor], Tensor]) -> tuple[float, list[np.ndarray]]:
    """Loss value and d(loss)/d(angles) for every layer.

    ``loss_fn`` maps a logits tensor ``(B, K)`` to a scalar tensor.
    """
    psi = np.asarray(psi)
    if psi.ndim == 2:
        psi = psi[None]
    _check_input(model, psi)
    logits, trace = _forward(model, psi, keep=True)
    z = Tensor(logits, requires_grad=True)
    loss = loss_fn(z)
    if loss.requires_grad:
        loss.backward()
    g_logits = z.grad if z.grad is not None else np.zeros_like(logits)
    return loss.item(), _backprop(model, trace, g_logits)


def loss_value(model: QnnModel, psi: np.ndarray, labels) -> float:
    return cross_entropy(Tensor(qnn_forward(model, psi)), labels).item()


# training --------------------------------------------------------------------

@dataclass
class QnnTrace:
    loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)


def accuracy(model: QnnModel, psi: np.ndarray, labels) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(predict(model, psi) == labels))


def qnn_train(model: QnnModel, psi: np.ndarray, labels, epochs: int = 50, lr: float = 0.05,
              batch_size: int = 32, seed: int = 0) -> QnnTrace:
    """Adam on all angles with parameter-shift gradients of the cross-entropy."""
    psi = np.asarray(psi)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("qnn_train: empty dataset")
    if np.any(labels < 0) or np.any(labels >= model.n_classes):
        raise ValueError(f"labels must lie in [0, {model.n_classes})")
    _check_input(model, psi)
    rng = np.random.default_rng(seed)
    states = [AdamState.zeros_like(a, lr=lr) for a in model.get_params()]
    trace = QnnTrace()
    for epoch in range(epochs):
        order = rng.permutation(len(labels))
        losses, weights = [], []
        for s in range(0, len(order), batch_size):
            idx = order[s:s + batch_size]
            yb = labels[idx]
            loss, grads = parameter_shift_grad(model, psi[idx], lambda z: cross_entropy(z, yb))
            for a, g, st in zip(model.get_params(), grads, states):
                adam_step(a, g, st)
            losses.append(loss)
            weights.append(len(idx))
        trace.loss.append(float(np.average(losses, weights=weights)))
        trace.train_acc.append(accuracy(model, psi, labels))
        log.debug("qnn epoch %d loss %.4f acc %.3f", epoch, trace.loss[-1], trace.train_acc[-1])
    return trace


# checkpoints -----------------------------------------------------------------

def save_qnn(model: QnnModel, path: str | Path, extra: dict | None = None) -> None:
    path = Path(path)
    fpqt.save(path, model.get_params())
    fpqt.write_manifest(path.with_suffix(".manifest"), {
        "kind": "qnn",
        "layers": len(model.layers),
        "channel_plan": model.channel_plan(),
        "n_qubits": [l.n_qubits for l in model.layers],
        "depth": [l.depth for l in model.layers],
        "readout": [l.readout for l in model.layers],
        "n_classes": model.n_classes,
        "seed": model.seed,
        **(extra or {}),
    })


def load_qnn(path: str | Path) -> QnnModel:
    path = Path(path)
    meta = fpqt.read_manifest(path.with_suffix(".manifest"))
    arrays = fpqt.load(path)
    readouts = meta["readout"].split(",")
    if len(arrays) != len(readouts):
        raise fpqt.FormatError(f"{path}: {len(arrays)} angle arrays but {len(readouts)} layers")
    return QnnModel([QnnLayer(a.copy(), r) for a, r in zip(arrays, readouts)],
                    int(meta["n_classes"]), int(meta.get("seed", 0)))
