"""Comparison encoders: angle, raw amplitude, PCA, SQE and ATP.

Each turns an image into quantum-ready registers and, where it makes sense,
a classical reconstruction that the fidelity metrics can score.  Colour
images are reduced to their channel mean before encoding; reconstructions
are broadcast back to the original channel count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import fpqt
from .functional import DegenerateInputError
from .imaging import downsample, nearest_matrix, to_gray, upsample

KINDS = ("angle", "amplitude", "pca", "sqe", "atp", "fpqe")


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    qubits: int
    latent_shape: tuple[int, ...]
    pruning: bool = False
    keep_fraction: float = 0.5
    pca_mode: str = "amplitude"  # or "angle"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.qubits < 1:
            raise ValueError("qubits must be positive")
        if self.kind == "atp" and not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must lie in (0, 1]")
        if self.kind == "angle" and int(np.prod(self.latent_shape)) != self.qubits:
            raise ValueError(f"angle encoding: grid {self.latent_shape} needs {np.prod(self.latent_shape)} qubits, "
                             f"spec says {self.qubits}")
        if self.kind == "amplitude" and 2 ** self.qubits != int(np.prod(self.latent_shape)):
            raise ValueError(f"amplitude encoding: {self.latent_shape} is not 2**{self.qubits} values")
        if self.kind == "pca" and self.pca_mode not in ("amplitude", "angle"):
            raise ValueError(f"unknown pca_mode {self.pca_mode!r}")

    def label(self) -> str:
        return f"{self.kind}-{self.qubits}"


# Nominal settings per encoder. ATP keeps a 16x16 latent, which is 8 register
# qubits even though the nominal count listed for it is 9.
TABLE1 = {
    "angle": EncoderSpec("angle", 9, (3, 3)),
    "amplitude": EncoderSpec("amplitude", 8, (16, 16)),
    "pca": EncoderSpec("pca", 9, (9,)),
    "sqe": EncoderSpec("sqe", 9, (3, 9)),
    "atp": EncoderSpec("atp", 9, (16, 16), pruning=True),
    "fpqe": EncoderSpec("fpqe", 6, (64, 64)),
}


def grid_for(qubits: int) -> tuple[int, int]:
    """Most square (rows, cols) grid with rows * cols == qubits."""
    rows = int(np.sqrt(qubits))
    while qubits % rows:
        rows -= 1
    return rows, qubits // rows


def spec_for(kind: str, qubits: int | None = None, **kw) -> EncoderSpec:
    """Preset for ``kind``, optionally at a different nominal qubit count."""
    base = TABLE1[kind]
    if qubits is None or qubits == base.qubits:
        return EncoderSpec(**{**base.__dict__, **kw})
    if kind == "angle":
        shape = grid_for(qubits)
    elif kind == "amplitude":
        shape = (2 ** (qubits // 2), 2 ** (qubits - qubits // 2))
    elif kind == "pca":
        shape = (qubits,)
    elif kind == "sqe":
        shape = (3, qubits)
    elif kind == "atp":
        shape = (2 ** ((qubits - 1) // 2), 2 ** (qubits - 1 - (qubits - 1) // 2))
    else:
        raise ValueError("fpqe qubit count follows from its encoder config")
    return EncoderSpec(kind, qubits, shape, pruning=(kind == "atp"), **kw)


def _product_state(factors: np.ndarray) -> np.ndarray:
    """Kronecker product of single-qubit states; ``factors`` is (q, 2), qubit 0 first."""
    return reduce(np.kron, list(factors))


def _restore(gray: np.ndarray, like: np.ndarray) -> np.ndarray:
    like = np.asarray(like)
    return np.broadcast_to(gray, like.shape).copy() if like.ndim == 3 else gray


def _unit(v: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    norm = float(np.sqrt(np.sum(v * v)))
    if norm == 0.0:
        raise DegenerateInputError(f"{what}: all-zero input cannot be amplitude encoded")
    return v / norm, norm


# angle -----------------------------------------------------------------------

@dataclass
class AngleEncoding:
    angles: np.ndarray  # (q,) in radians
    state: np.ndarray   # (2**q,) product register
    grid: np.ndarray    # downsampled image the angles came from


def angle_encode(x, grid: tuple[int, int] = (3, 3)) -> AngleEncoding:
    """Area-average to ``grid``, angle = pi * pixel, one RY-rotated qubit per cell."""
    small = np.clip(downsample(to_gray(x), grid), 0.0, 1.0)
    angles = np.pi * small.reshape(-1)
    factors = np.stack([np.cos(angles / 2), np.sin(angles / 2)], axis=1)
    return AngleEncoding(angles, _product_state(factors), small)


def angle_reconstruct(enc: AngleEncoding, like) -> np.ndarray:
    h, w = np.asarray(like).shape[-2:]
    gh, gw = enc.grid.shape
    gray = nearest_matrix(gh, h) @ enc.grid @ nearest_matrix(gw, w).T
    return _restore(gray, like)


# amplitude --------------------------------------------------------------------

def _resized(x, size) -> np.ndarray:
    return downsample(to_gray(x), size)


def amplitude_baseline_encode(x, size: tuple[int, int] = (16, 16)) -> np.ndarray:
    """Area-resize to ``size``, flatten, normalise."""
    v, _ = _unit(_resized(x, size).reshape(-1), "amplitude encoding")
    return v


def amplitude_reconstruct(x, size: tuple[int, int] = (16, 16)) -> np.ndarray:
    small = _resized(x, size)
    v, norm = _unit(small.reshape(-1), "amplitude encoding")
    h, w = np.asarray(x).shape[-2:]
    return _restore(upsample((v * norm).reshape(size), (h, w)), x)


# PCA --------------------------------------------------------------------------

@dataclass
class PcaModel:
    components: np.ndarray  # (d, k), orthonormal columns
    mean: np.ndarray        # (d,)
    explained_variance: np.ndarray  # (k,)
    image_shape: tuple[int, ...]
    code_min: np.ndarray = field(default=None)
    code_max: np.ndarray = field(default=None)

    @property
    def k(self) -> int:
        return self.components.shape[1]


def pca_fit(images: np.ndarray, k: int = 9) -> PcaModel:
    """Top-``k`` principal directions of the centred, flattened images."""
    images = np.asarray(images, dtype=np.float64)
    n = len(images)
    if n < k:
        raise ValueError(f"pca_fit: need at least {k} images, got {n}")
    flat = images.reshape(n, -1)
    mean = flat.mean(axis=0)
    centred = flat - mean
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    comps = vt[:k].T.copy()
    # fix the sign so fitting is reproducible: largest |entry| of each column positive
    signs = np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(k)])
    comps *= np.where(signs == 0, 1.0, signs)
    var = s[:k] ** 2 / max(n - 1, 1)
    codes = centred @ comps
    return PcaModel(comps, mean, var, images.shape[1:], codes.min(axis=0), codes.max(axis=0))


def pca_encode(model: PcaModel, x) -> np.ndarray:
    """Projection coefficients; batch input (N, ...) gives (N, k)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == tuple(model.image_shape)
    flat = x.reshape(1 if single else len(x), -1)
    code = (flat - model.mean) @ model.components
    return code[0] if single else code


def pca_reconstruct(model: PcaModel, code) -> np.ndarray:
    code = np.asarray(code, dtype=np.float64)
    flat = code @ model.components.T + model.mean
    return flat.reshape(*code.shape[:-1], *model.image_shape)


def pca_register(model: PcaModel, code, mode: str = "amplitude") -> np.ndarray:
    """Quantum register for a PCA code.

    ``amplitude``: zero-pad k values to the next power of two and normalise.
    ``angle``: one RY qubit per coefficient, angle scaled from the training
    code range onto [0, pi].
    """
    code = np.asarray(code, dtype=np.float64)
    if mode == "amplitude":
        width = 1 << max(0, (model.k - 1).bit_length())
        v = np.zeros(width)
        v[:model.k] = code
        out, _ = _unit(v, "pca register")
        return out
    if mode == "angle":
        span = np.where(model.code_max > model.code_min, model.code_max - model.code_min, 1.0)
        t = np.clip((code - model.code_min) / span, 0.0, 1.0)
        angles = np.pi * t
        return _product_state(np.stack([np.cos(angles / 2), np.sin(angles / 2)], axis=1))
    raise ValueError(f"unknown pca mode {mode!r}")


def save_pca(model: PcaModel, path) -> None:
    fpqt.save(path, [model.components, model.mean, model.explained_variance,
                     np.asarray(model.image_shape, dtype=np.float64), model.code_min, model.code_max])


def load_pca(path) -> PcaModel:
    comps, mean, var, shape, lo, hi = fpqt.load(path)
    return PcaModel(comps, mean, var, tuple(int(v) for v in shape), lo, hi)


# SQE --------------------------------------------------------------------------

def _patch_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.cumsum([0] + [len(a) for a in np.array_split(np.arange(n), parts)])
    return [(int(edges[i]), int(edges[i + 1])) for i in range(parts)]


def patch_grid(shape: tuple[int, int], grid: tuple[int, int]) -> list[tuple[slice, slice]]:
    h, w = shape
    if h < grid[0] or w < grid[1]:
        raise ValueError(f"image {h}x{w} is smaller than the {grid[0]}x{grid[1]} patch grid")
    return [(slice(r0, r1), slice(c0, c1))
            for r0, r1 in _patch_bounds(h, grid[0]) for c0, c1 in _patch_bounds(w, grid[1])]


@dataclass
class SqeEncoding:
    stats: np.ndarray  # (3, patches): mean, row-gradient mean, column-gradient mean
    theta: np.ndarray
    phi: np.ndarray
    state: np.ndarray  # product of one qubit per patch, complex
    grid: tuple[int, int]


def sqe_encode(x, grid: tuple[int, int] = (3, 3)) -> SqeEncoding:
    """Summarise each patch by (mean, mean d/drow, mean d/dcol) and map it to a Bloch vector.

    theta = pi * mean, phi = pi * (row-gradient mean + column-gradient mean).
    """
    img = to_gray(x)
    stats = []
    for rs, cs in patch_grid(img.shape, grid):
        p = img[rs, cs]
        gr = np.diff(p, axis=0).mean() if p.shape[0] > 1 else 0.0
        gc = np.diff(p, axis=1).mean() if p.shape[1] > 1 else 0.0
        stats.append((p.mean(), gr, gc))
    stats = np.array(stats).T
    theta = np.pi * stats[0]
    phi = np.pi * (stats[1] + stats[2])
    factors = np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=1)
    return SqeEncoding(stats, theta, phi, _product_state(factors), grid)


def sqe_reconstruct(enc: SqeEncoding, like) -> np.ndarray:
    like = np.asarray(like)
    gray = np.empty(like.shape[-2:])
    for (rs, cs), m in zip(patch_grid(gray.shape, enc.grid), enc.stats[0]):
        gray[rs, cs] = m
    return _restore(gray, like)


# ATP --------------------------------------------------------------------------

@dataclass
class AtpEncoding:
    vector: np.ndarray  # unit norm
    pruned: np.ndarray  # resized image with small coefficients zeroed, original scale
    threshold: float


def atp_encode(x, keep_fraction: float = 0.5, size: tuple[int, int] = (16, 16)) -> AtpEncoding:
    """Zero every coefficient whose magnitude is below the (1 - keep_fraction) quantile."""
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must lie in (0, 1]")
    small = _resized(x, size)
    v = small.reshape(-1).copy()
    thr = float(np.quantile(np.abs(v), 1.0 - keep_fraction))
    v[np.abs(v) < thr] = 0.0
    if not np.any(v):
        raise DegenerateInputError("atp: every coefficient was pruned")
    unit, _ = _unit(v, "atp")
    return AtpEncoding(unit, v.reshape(size), thr)


def atp_reconstruct(enc: AtpEncoding, like) -> np.ndarray:
    h, w = np.asarray(like).shape[-2:]
    return _restore(upsample(enc.pruned, (h, w)), like)
