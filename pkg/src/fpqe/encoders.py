"""Batch front ends: every encoder as ``fit`` / ``registers`` / ``reconstruct``.

``registers`` returns an array ``(N, channels, 2**n)`` of unit-norm rows that
the QNN consumes directly.
"""

from __future__ import annotations

import numpy as np

from . import baselines as bl
from .autoencoder import AutoencoderModel, FrozenEncoder, fpqe_encode, freeze_encoder, reconstruct
from .baselines import EncoderSpec


class BatchEncoder:
    spec: EncoderSpec
    needs_fit = False

    def fit(self, images: np.ndarray) -> "BatchEncoder":
        return self

    def registers(self, images: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reconstruct(self, images: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityEncoder(BatchEncoder):
    """Fidelity control: reconstruction is the input itself."""

    def __init__(self):
        self.spec = None

    def reconstruct(self, images):
        return np.array(images, copy=True)


class AngleBatch(BatchEncoder):
    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    def registers(self, images):
        return np.stack([bl.angle_encode(x, self.spec.latent_shape).state for x in images])[:, None]

    def reconstruct(self, images):
        return np.stack([bl.angle_reconstruct(bl.angle_encode(x, self.spec.latent_shape), x) for x in images])


class AmplitudeBatch(BatchEncoder):
    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    def registers(self, images):
        return np.stack([bl.amplitude_baseline_encode(x, self.spec.latent_shape) for x in images])[:, None]

    def reconstruct(self, images):
        return np.stack([bl.amplitude_reconstruct(x, self.spec.latent_shape) for x in images])


class PcaBatch(BatchEncoder):
    needs_fit = True

    def __init__(self, spec: EncoderSpec, model: bl.PcaModel | None = None):
        self.spec = spec
        self.model = model

    def _require(self):
        if self.model is None:
            raise RuntimeError("PCA encoder has no fitted model; fit it on training images "
                               "(or pass a saved PCA model) before encoding")
        return self.model

    def fit(self, images):
        self.model = bl.pca_fit(images, self.spec.latent_shape[0])
        return self

    def registers(self, images):
        m = self._require()
        codes = bl.pca_encode(m, images)
        return np.stack([bl.pca_register(m, c, self.spec.pca_mode) for c in codes])[:, None]

    def reconstruct(self, images):
        m = self._require()
        return bl.pca_reconstruct(m, bl.pca_encode(m, images))


class SqeBatch(BatchEncoder):
    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        self.grid = bl.grid_for(spec.latent_shape[1])

    def registers(self, images):
        return np.stack([bl.sqe_encode(x, self.grid).state for x in images])[:, None]

    def reconstruct(self, images):
        return np.stack([bl.sqe_reconstruct(bl.sqe_encode(x, self.grid), x) for x in images])


class AtpBatch(BatchEncoder):
    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    def registers(self, images):
        return np.stack([bl.atp_encode(x, self.spec.keep_fraction, self.spec.latent_shape).vector
                         for x in images])[:, None]

    def reconstruct(self, images):
        return np.stack([bl.atp_reconstruct(bl.atp_encode(x, self.spec.keep_fraction, self.spec.latent_shape), x)
                         for x in images])


class FpqeBatch(BatchEncoder):
    """Frozen encoder for registers, the full encoder-decoder for reconstructions."""

    def __init__(self, spec: EncoderSpec, model: AutoencoderModel):
        self.spec = spec
        self.model = model
        self.handle: FrozenEncoder = freeze_encoder(model)

    def registers(self, images):
        return fpqe_encode(self.handle, images)

    def reconstruct(self, images):
        out = [reconstruct(self.model, images[s:s + 256]) for s in range(0, len(images), 256)]
        return np.concatenate(out)


def make_encoder(spec: EncoderSpec, autoencoder: AutoencoderModel | None = None,
                 pca: bl.PcaModel | None = None) -> BatchEncoder:
    if spec.kind == "angle":
        return AngleBatch(spec)
    if spec.kind == "amplitude":
        return AmplitudeBatch(spec)
    if spec.kind == "pca":
        return PcaBatch(spec, pca)
    if spec.kind == "sqe":
        return SqeBatch(spec)
    if spec.kind == "atp":
        return AtpBatch(spec)
    if spec.kind == "fpqe":
        if autoencoder is None:
            raise ValueError("fpqe needs a trained autoencoder")
        return FpqeBatch(spec, autoencoder)
    raise ValueError(f"unknown encoder kind {spec.kind!r}")
