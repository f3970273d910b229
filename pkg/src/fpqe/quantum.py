"""Exact statevector simulation: amplitude encoding, RY/RZ/CNOT, the layered ansatz and Z readout.

Qubit 0 is the most significant bit of the basis index, so for n qubits
basis state |b0 b1 ... b(n-1)> sits at index sum(b_q * 2**(n-1-q)).

The kernels here work on arrays of shape ``(..., 2**n)`` so that many
registers (samples, channels, shifted parameter copies) go through a
circuit in one numpy call.  Angle arrays broadcast against the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 12


class EncodingError(ValueError):
    pass


class QubitIndexError(IndexError):
    pass


def n_qubits_for(length: int) -> int:
    n = int(length).bit_length() - 1
    if length < 1 or (1 << n) != length:
        raise EncodingError(f"register length {length} is not a power of two")
    return n


@dataclass
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        n_qubits_for(len(self.amplitudes))

    @property
    def n_qubits(self) -> int:
        return n_qubits_for(len(self.amplitudes))

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        amps = np.zeros(2 ** n, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def amplitude_encode(psi, tol: float = 1e-9) -> StateVector:
    """Load a real unit vector of length 2**n as the amplitudes of n qubits."""
    psi = np.asarray(psi)
    if psi.ndim != 1:
        raise EncodingError(f"expected a vector, got shape {psi.shape}")
    n = n_qubits_for(len(psi))
    if n > MAX_QUBITS:
        raise EncodingError(f"{n} qubits exceeds the simulator limit of {MAX_QUBITS}")
    if np.iscomplexobj(psi) and np.any(psi.imag != 0):
        raise EncodingError("amplitude encoding takes real vectors")
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > tol:
        raise EncodingError(f"vector norm is {norm}, not 1")
    return StateVector(np.real(psi).astype(np.complex128))


# batched kernels --------------------------------------------------------------

def _split(states: np.ndarray, q: int, n: int) -> np.ndarray:
    lead = states.shape[:-1]
    return states.reshape(*lead, 2 ** q, 2, 2 ** (n - q - 1))


def ry_matrix(theta) -> np.ndarray:
    """RY(theta) as ``(..., 2, 2)`` complex matrices."""
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(np.complex128)


def rz_matrix(theta) -> np.ndarray:
    """RZ(theta) = diag(e^{-i theta/2}, e^{i theta/2}) as ``(..., 2, 2)`` matrices."""
    theta = np.asarray(theta, dtype=np.float64)
    ph = np.exp(-0.5j * theta)
    zero = np.zeros_like(ph)
    return np.stack([np.stack([ph, zero], -1), np.stack([zero, np.conj(ph)], -1)], -2)


def apply_1q(states: np.ndarray, q: int, u: np.ndarray, n: int | None = None) -> np.ndarray:
    """Apply 2x2 matrices ``u`` (leading axes broadcast against the states) to qubit ``q``."""
    n = n_qubits_for(states.shape[-1]) if n is None else n
    out = np.asarray(u)[..., None, :, :] @ _split(states, q, n)
    return out.reshape(out.shape[:-3] + (2 ** n,))


def ry(states: np.ndarray, q: int, theta, n: int | None = None) -> np.ndarray:
    return apply_1q(states, q, ry_matrix(theta), n)


def rz(states: np.ndarray, q: int, theta, n: int | None = None) -> np.ndarray:
    return apply_1q(states, q, rz_matrix(theta), n)


def ry_real(states: np.ndarray, q: int, theta, n: int | None = None) -> np.ndarray:
    """RY on complex states via a real matmul over the (re, im) float view; same result as :func:`ry`."""
    n = n_qubits_for(states.shape[-1]) if n is None else n
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    u = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    x = np.ascontiguousarray(states, dtype=np.complex128)
    v = x.view(np.float64).reshape(x.shape[:-1] + (2 ** q, 2, 2 ** (n - q)))
    out = u[..., None, :, :] @ v
    return out.reshape(out.shape[:-3] + (2 ** (n + 1),)).view(np.complex128)


def z_phases(phi: np.ndarray, n: int) -> np.ndarray:
    """Diagonal of RZ(phi_0) x ... x RZ(phi_{n-1}); ``phi`` is ``(..., n)``, result ``(..., 2**n)``."""
    return np.exp(-0.5j * (np.asarray(phi, dtype=np.float64) @ z_signs(n)))


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    cbit = (idx >> (n - 1 - control)) & 1
    return idx ^ (cbit << (n - 1 - target))


def cnot(states: np.ndarray, control: int, target: int, n: int | None = None) -> np.ndarray:
    n = n_qubits_for(states.shape[-1]) if n is None else n
    return states[..., _cnot_perm(n, control, target)]


@lru_cache(maxsize=None)
def _ring_perm(n: int, inverse: bool = False) -> np.ndarray:
    """Index map for the CNOT ring q -> (q+1) mod n applied in order q = 0..n-1."""
    perm = np.arange(2 ** n)
    for q in ring_pairs(n):
        perm = perm[_cnot_perm(n, *q)]
    if inverse:
        inv = np.empty_like(perm)
        inv[perm] = np.arange(2 ** n)
        return inv
    return perm


def ring_pairs(n: int) -> list[tuple[int, int]]:
    return [(q, (q + 1) % n) for q in range(n)] if n > 1 else []


def _check_qubit(q: int, n: int) -> None:
    if not 0 <= q < n:
        raise QubitIndexError(f"qubit {q} out of range for {n} qubits")


def apply_gate(state: StateVector, gate: str, qubits, theta: float | None = None) -> StateVector:
    """Apply ``"RY"``, ``"RZ"`` (with ``theta``) or ``"CNOT"`` (control, target)."""
    n = state.n_qubits
    qubits = (qubits,) if np.isscalar(qubits) else tuple(qubits)
    for q in qubits:
        _check_qubit(q, n)
    g = gate.upper()
    if g == "RY":
        amps = ry(state.amplitudes, qubits[0], theta, n)
    elif g == "RZ":
        amps = rz(state.amplitudes, qubits[0], theta, n)
    elif g in ("CNOT", "CX"):
        c, t = qubits
        if c == t:
            raise QubitIndexError("CNOT control and target must differ")
        amps = cnot(state.amplitudes, c, t, n)
    else:
        raise ValueError(f"unsupported gate {gate!r}")
    return StateVector(amps)


@dataclass
class PqcParams:
    """Angles of the layered ansatz, shape ``(depth, n_qubits, 2)``: [..., 0] is RY, [..., 1] is RZ."""
    angles: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 3 or self.angles.shape[-1] != 2:
            raise ValueError(f"angles must have shape (depth, n_qubits, 2), got {self.angles.shape}")
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("angles must be finite")

    @property
    def depth(self) -> int:
        return self.angles.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[1]

    @classmethod
    def random(cls, n_qubits: int, depth: int, rng: np.random.Generator, scale: float = np.pi) -> "PqcParams":
        return cls(rng.uniform(-scale, scale, size=(depth, n_qubits, 2)))


def pqc_forward(states: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Run the ansatz on a stack of registers.

    ``angles`` has shape ``(..., depth, n, 2)`` whose leading axes broadcast
    against ``states.shape[:-1]``.  Each of the ``depth`` repetitions is RY
    then RZ on every qubit followed by the CNOT ring.
    """
    states = np.asarray(states, dtype=np.complex128)
    n = n_qubits_for(states.shape[-1])
    angles = np.asarray(angles, dtype=np.float64)
    depth = angles.shape[-3]
    if angles.shape[-2] != n:
        raise ValueError(f"angles are for {angles.shape[-2]} qubits, state has {n}")
    lead = np.broadcast_shapes(states.shape[:-1], angles.shape[:-3])
    out = np.broadcast_to(states, lead + (2 ** n,))
    ring = _ring_perm(n)
    # RZ on qubit q commutes with RY on every other qubit, so each repetition
    # is the RY layer, one diagonal phase for all RZ gates, then the ring
    for d in range(depth):
        for q in range(n):
            out = ry_real(out, q, angles[..., d, q, 0], n)
        out = out * z_phases(angles[..., d, :, 1], n)
        if n > 1:
            out = out[..., ring]
    return np.ascontiguousarray(out)


def pqc_adjoint(states: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Apply the inverse of :func:`pqc_forward`."""
    states = np.asarray(states, dtype=np.complex128)
    n = n_qubits_for(states.shape[-1])
    angles = np.asarray(angles, dtype=np.float64)
    inv_ring = _ring_perm(n, inverse=True)
    out = states
    for d in reversed(range(angles.shape[-3])):
        if n > 1:
            out = out[..., inv_ring]
        out = out * np.conj(z_phases(angles[..., d, :, 1], n))
        for q in reversed(range(n)):
            out = ry_real(out, q, -angles[..., d, q, 0], n)
    return out


def apply_pqc(state: StateVector, params: PqcParams) -> StateVector:
    if params.n_qubits != state.n_qubits:
        raise ValueError(f"circuit has {params.n_qubits} qubits, state has {state.n_qubits}")
    return StateVector(pqc_forward(state.amplitudes, params.angles))


@lru_cache(maxsize=None)
def z_signs(n: int) -> np.ndarray:
    """``(n, 2**n)`` array: +1/-1 eigenvalue of Z on qubit q for each basis index."""
    idx = np.arange(2 ** n)
    bits = (idx[None, :] >> (n - 1 - np.arange(n))[:, None]) & 1
    return (1 - 2 * bits).astype(np.float64)


READOUTS = ("z0", "zmean", "zall")


def readout_observables(n: int, mode: str) -> np.ndarray:
    """Diagonals of the measured observables, shape ``(r, 2**n)``."""
    signs = z_signs(n)
    if mode == "z0":
        return signs[:1]
    if mode == "zmean":
        return signs.mean(axis=0, keepdims=True)
    if mode == "zall":
        return signs
    raise ValueError(f"unknown readout {mode!r}; choose from {READOUTS}")


def expectations(states: np.ndarray, mode: str = "z0") -> np.ndarray:
    """Diagonal-observable expectations, shape ``states.shape[:-1] + (r,)``."""
    n = n_qubits_for(states.shape[-1])
    probs = np.abs(states) ** 2
    return probs @ readout_observables(n, mode).T


def expect_z(state: StateVector, qubit: int = 0) -> float:
    n = state.n_qubits
    _check_qubit(qubit, n)
    return float(state.probabilities() @ z_signs(n)[qubit])


def sample_z(state: StateVector, shots: int, rng: np.random.Generator, qubit: int = 0) -> float:
    """Finite-shot estimate of <Z> on ``qubit``; measurement only, never used for training."""
    p = state.probabilities()
    p = p / p.sum()
    outcomes = rng.choice(len(p), size=shots, p=p)
    return float(z_signs(state.n_qubits)[qubit][outcomes].mean())


# dense reference operators ------------------------------------------------------

def gate_matrix(gate: str, n: int, qubits, theta: float | None = None) -> np.ndarray:
    """Full ``2**n x 2**n`` unitary built from Kronecker products."""
    qubits = (qubits,) if np.isscalar(qubits) else tuple(qubits)
    g = gate.upper()
    eye = np.eye(2, dtype=np.complex128)
    if g in ("RY", "RZ"):
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        single = np.array([[c, -s], [s, c]], dtype=np.complex128) if g == "RY" \
            else np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
        ops = [single if q == qubits[0] else eye for q in range(n)]
        out = ops[0]
        for op in ops[1:]:
            out = np.kron(out, op)
        return out
    if g in ("CNOT", "CX"):
        c, t = qubits
        p0 = np.diag([1, 0]).astype(np.complex128)
        p1 = np.diag([0, 1]).astype(np.complex128)
        x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
        a = [p0 if q == c else eye for q in range(n)]
        b = [p1 if q == c else (x if q == t else eye) for q in range(n)]
        ka, kb = a[0], b[0]
        for q in range(1, n):
            ka, kb = np.kron(ka, a[q]), np.kron(kb, b[q])
        return ka + kb
    raise ValueError(f"unsupported gate {gate!r}")


def pqc_matrix(params: PqcParams) -> np.ndarray:
    n = params.n_qubits
    u = np.eye(2 ** n, dtype=np.complex128)
    for d in range(params.depth):
        for q in range(n):
            u = gate_matrix("RY", n, q, params.angles[d, q, 0]) @ u
            u = gate_matrix("RZ", n, q, params.angles[d, q, 1]) @ u
        for c, t in ring_pairs(n):
            u = gate_matrix("CNOT", n, (c, t)) @ u
    return u
