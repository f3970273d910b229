"""Convolutional encoder-decoder and the frozen encoder front end built from it.

The encoder is a stack of conv(k=3) -> batch norm -> ReLU blocks that shrink
the image; the decoder mirrors it with transposed convolutions in reverse
block order and ends in a sigmoid so reconstructions live in [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fpqt
from .functional import (
    DegenerateInputError,
    RunningStats,
    batch_norm2d,
    conv2d,
    conv_output_size,
    conv_transpose2d,
    conv_transpose_output_size,
    mse_loss,
    relu,
    sigmoid,
)
from .optim import Adam
from .tensor import Tensor

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class DegenerateChannelError(DegenerateInputError):
    def __init__(self, channel: int, sample: int | None = None):
        where = f" in sample {sample}" if sample is not None else ""
        super().__init__(f"latent channel {channel}{where} has zero norm")
        self.channel = channel
        self.sample = sample


@dataclass(frozen=True)
class Block:
    out_channels: int
    stride: int = 2
    padding: int = 1
    kernel: int = 3


@dataclass(frozen=True)
class EncoderConfig:
    input_shape: tuple[int, int, int]
    blocks: tuple[Block, ...]
    use_batchnorm: bool = True
    # "none" keeps the last block linear (conv + BN) so latents are signed and
    # a channel can't be zeroed out by the ReLU
    latent_activation: str = "none"
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    # the 64x8x8 wide-latent preset holds more values than a 28x28 image
    allow_expansion: bool = False

    def spatial_chain(self) -> list[tuple[int, int]]:
        _, h, w = self.input_shape
        chain = [(h, w)]
        for i, b in enumerate(self.blocks):
            if h + 2 * b.padding < b.kernel or w + 2 * b.padding < b.kernel:
                raise ConfigError(f"block {i}: kernel {b.kernel} does not fit a {h}x{w} input "
                                  f"with padding {b.padding}")
            h = conv_output_size(h, b.kernel, b.stride, b.padding)
            w = conv_output_size(w, b.kernel, b.stride, b.padding)
            chain.append((h, w))
        return chain

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        h, w = self.spatial_chain()[-1]
        return (self.blocks[-1].out_channels, h, w)

    def validate(self, latent_shape: tuple[int, int, int] | None = None) -> None:
        if not self.blocks:
            raise ConfigError("encoder needs at least one block")
        if self.latent_activation not in ("none", "relu"):
            raise ConfigError(f"unknown latent_activation {self.latent_activation!r}")
        for i, b in enumerate(self.blocks):
            if b.out_channels < 1 or b.stride < 1 or b.padding < 0 or b.kernel < 1:
                raise ConfigError(f"block {i}: invalid parameters {b}")
        got = self.latent_shape
        if latent_shape is not None and tuple(latent_shape) != got:
            raise ConfigError(f"blocks produce latent {got}, config asks for {tuple(latent_shape)}")
        if np.prod(got) > np.prod(self.input_shape) and not self.allow_expansion:
            raise ConfigError(f"latent {got} is larger than the input {self.input_shape}")

    def blocks_str(self) -> str:
        return ";".join(f"{b.out_channels}:{b.stride}:{b.padding}" for b in self.blocks)

    @staticmethod
    def parse_blocks(text: str) -> tuple[Block, ...]:
        out = []
        for part in text.split(";"):
            fields_ = [int(v) for v in part.split(":")]
            out.append(Block(*fields_))
        return tuple(out)


def mnist_config(latent_channels: int = 8) -> EncoderConfig:
    """28x28 -> 14 -> 7 -> 4 with three stride-2 blocks."""
    return EncoderConfig((1, 28, 28), (Block(16), Block(32), Block(latent_channels)))


def cifar_config(latent_channels: int = 8) -> EncoderConfig:
    """32x32 -> 16 -> 8 -> 4."""
    return EncoderConfig((3, 32, 32), (Block(32), Block(64), Block(latent_channels)))


def wide_latent_config(input_shape=(1, 28, 28), latent_channels: int = 64) -> EncoderConfig:
    """Latent of ``latent_channels`` x 8 x 8, i.e. 6-qubit channels."""
    c, h, _ = input_shape
    if h == 28:
        blocks = (Block(16, 2, 3), Block(32, 2, 1), Block(latent_channels, 1, 1))
    elif h == 32:
        blocks = (Block(16, 2, 1), Block(32, 2, 1), Block(latent_channels, 1, 1))
    else:
        raise ConfigError(f"no 8x8 latent preset for input height {h}")
    return EncoderConfig(tuple(input_shape), blocks, allow_expansion=True)


@dataclass
class ConvLayer:
    weight: Tensor
    bias: Tensor
    stride: int
    padding: int
    transpose: bool = False
    output_padding: int = 0
    gamma: Tensor | None = None
    beta: Tensor | None = None
    running: RunningStats | None = None
    activation: str = "relu"

    def __call__(self, x: Tensor, train: bool, eps: float) -> Tensor:
        if self.transpose:
            y = conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding, self.output_padding)
        else:
            y = conv2d(x, self.weight, self.bias, self.stride, self.padding)
        if self.gamma is not None:
            y = batch_norm2d(y, self.gamma, self.beta, self.running, train=train, eps=eps)
        if self.activation == "relu":
            y = relu(y)
        elif self.activation == "sigmoid":
            y = sigmoid(y)
        return y

    def parameters(self) -> list[Tensor]:
        ps = [self.weight, self.bias]
        if self.gamma is not None:
            ps += [self.gamma, self.beta]
        return ps

    def arrays(self) -> list[np.ndarray]:
        out = [p.data for p in self.parameters()]
        if self.running is not None:
            out += [self.running.mean, self.running.var]
        return out

    def load_arrays(self, arrays: list[np.ndarray]) -> None:
        for p, a in zip(self.parameters(), arrays):
            if p.data.shape != a.shape:
                raise fpqt.FormatError(f"checkpoint tensor shape {a.shape} != expected {p.data.shape}")
            p.data[...] = a
        if self.running is not None:
            self.running.mean = arrays[-2].copy()
            self.running.var = arrays[-1].copy()


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class AutoencoderModel:
    config: EncoderConfig
    encoder: list[ConvLayer]
    decoder: list[ConvLayer]
    seed: int = 0
    frozen: bool = False
    epochs_trained: int = 0
    final_loss: float = float("nan")

    def encode(self, x, train: bool = False) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(x)
        for layer in self.encoder:
            h = layer(h, train and not self.frozen, self.config.bn_eps)
        return h

    def decode(self, z, train: bool = False) -> Tensor:
        h = z if isinstance(z, Tensor) else Tensor(z)
        for layer in self.decoder:
            h = layer(h, train, self.config.bn_eps)
        return h

    def forward(self, x, train: bool = False) -> Tensor:
        return self.decode(self.encode(x, train), train)

    def parameters(self, include_encoder: bool = True) -> list[Tensor]:
        ps = []
        if include_encoder and not self.frozen:
            for layer in self.encoder:
                ps += layer.parameters()
        for layer in self.decoder:
            ps += layer.parameters()
        return ps

    def arrays(self) -> list[np.ndarray]:
        return [a for layer in self.encoder + self.decoder for a in layer.arrays()]

    def load_arrays(self, arrays: list[np.ndarray]) -> None:
        i = 0
        for layer in self.encoder + self.decoder:
            n = len(layer.arrays())
            layer.load_arrays(arrays[i:i + n])
            i += n
        if i != len(arrays):
            raise fpqt.FormatError(f"checkpoint has {len(arrays)} tensors, model expects {i}")


def build_autoencoder(config: EncoderConfig, seed: int = 0) -> AutoencoderModel:
    config.validate()
    rng = np.random.default_rng(seed)
    chain = config.spatial_chain()
    channels = [config.input_shape[0]] + [b.out_channels for b in config.blocks]
    bn = config.use_batchnorm

    encoder = []
    for i, b in enumerate(config.blocks):
        cin, cout = channels[i], channels[i + 1]
        fan_in = cin * b.kernel * b.kernel
        last = i == len(config.blocks) - 1
        act = config.latent_activation if last else "relu"
        encoder.append(ConvLayer(
            weight=Tensor(_uniform(rng, (cout, cin, b.kernel, b.kernel), fan_in), requires_grad=True),
            bias=Tensor(np.zeros(cout), requires_grad=True),
            stride=b.stride, padding=b.padding,
            gamma=Tensor(np.ones(cout), requires_grad=True) if bn else None,
            beta=Tensor(np.zeros(cout), requires_grad=True) if bn else None,
            running=RunningStats.fresh(cout, config.bn_momentum) if bn else None,
            activation=act,
        ))

    decoder = []
    for i in reversed(range(len(config.blocks))):
        b = config.blocks[i]
        cin, cout = channels[i + 1], channels[i]
        (h_out, w_out), (h_in, _) = chain[i], chain[i + 1]
        plain = conv_transpose_output_size(h_in, b.kernel, b.stride, b.padding)
        out_pad = h_out - plain
        if out_pad < 0 or (out_pad and out_pad >= b.stride):
            raise ConfigError(f"block {i}: transposed conv cannot map {h_in} back to {h_out}")
        first = i == 0
        fan_in = cin * b.kernel * b.kernel
        decoder.append(ConvLayer(
            weight=Tensor(_uniform(rng, (cin, cout, b.kernel, b.kernel), fan_in), requires_grad=True),
            bias=Tensor(np.zeros(cout), requires_grad=True),
            stride=b.stride, padding=b.padding, transpose=True, output_padding=out_pad,
            gamma=Tensor(np.ones(cout), requires_grad=True) if bn and not first else None,
            beta=Tensor(np.zeros(cout), requires_grad=True) if bn and not first else None,
            running=RunningStats.fresh(cout, config.bn_momentum) if bn and not first else None,
            activation="sigmoid" if first else "relu",
        ))
    return AutoencoderModel(config, encoder, decoder, seed=seed)


@dataclass
class TrainResult:
    trace: list[float] = field(default_factory=list)
    initial_mse: float = float("nan")
    final_mse: float = float("nan")


def dataset_mse(model: AutoencoderModel, images: np.ndarray, batch_size: int = 256) -> float:
    total = 0.0
    for s in range(0, len(images), batch_size):
        xb = images[s:s + batch_size]
        total += float(((model.forward(xb).data - xb) ** 2).sum())
    return total / images.size


def train_autoencoder(model: AutoencoderModel, images: np.ndarray, epochs: int = 30, lr: float = 1e-3,
                      batch_size: int = 16, seed: int = 0) -> TrainResult:
    """Minimize reconstruction MSE with Adam; ``trace[e]`` is epoch e's mean batch loss."""
    if model.frozen:
        raise ValueError("cannot train a frozen autoencoder")
    images = np.asarray(images, dtype=np.float64)
    if len(images) == 0:
        raise ValueError("train_autoencoder: empty dataset")
    if images.shape[1:] != tuple(model.config.input_shape):
        raise ValueError(f"images have shape {images.shape[1:]}, model expects {model.config.input_shape}")
    result = TrainResult(initial_mse=dataset_mse(model, images))
    rng = np.random.default_rng(seed)
    opt = Adam(model.parameters(), lr=lr)
    for epoch in range(epochs):
        order = rng.permutation(len(images))
        losses, weights = [], []
        for s in range(0, len(order), batch_size):
            xb = images[order[s:s + batch_size]]
            opt.zero_grad()
            loss = mse_loss(model.forward(xb, train=True), Tensor(xb))
            loss.backward()
            opt.step()
            losses.append(loss.item())
            weights.append(len(xb))
        result.trace.append(float(np.average(losses, weights=weights)))
        log.debug("ae epoch %d mse %.5f", epoch, result.trace[-1])
    model.epochs_trained += epochs
    result.final_mse = dataset_mse(model, images)
    model.final_loss = result.final_mse
    return result


def reconstruct(model: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    """Eval-mode decode(encode(x)); accepts one image or a batch."""
    x = np.asarray(x, dtype=np.float64)
    return model.forward(x).data


class FrozenEncoder:
    """Read-only encoder handle; the decoder is deliberately not reachable from here."""

    __slots__ = ("_config", "_layers")

    def __init__(self, config: EncoderConfig, layers: list[ConvLayer]):
        frozen_layers = []
        for layer in layers:
            arrays = [a.copy() for a in layer.arrays()]
            for a in arrays:
                a.flags.writeable = False
            n_param = len(layer.parameters())
            params = [Tensor(a) for a in arrays[:n_param]]
            running = RunningStats(arrays[-2], arrays[-1], layer.running.momentum) if layer.running else None
            frozen_layers.append(ConvLayer(
                weight=params[0], bias=params[1], stride=layer.stride, padding=layer.padding,
                gamma=params[2] if layer.gamma is not None else None,
                beta=params[3] if layer.gamma is not None else None,
                running=running, activation=layer.activation,
            ))
        self._config = config
        self._layers = tuple(frozen_layers)

    @property
    def config(self) -> EncoderConfig:
        return self._config

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return self._config.latent_shape

    def encode(self, x) -> np.ndarray:
        h = Tensor(np.asarray(x, dtype=np.float64))
        for layer in self._layers:
            h = layer(h, False, self._config.bn_eps)
        return h.data

    def arrays(self) -> list[np.ndarray]:
        return [a for layer in self._layers for a in layer.arrays()]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        fpqt.save(path, self.arrays())
        fpqt.write_manifest(path.with_suffix(".manifest"), {
            "kind": "frozen_encoder",
            **config_to_flat(self._config),
        })

    @classmethod
    def load(cls, path: str | Path) -> "FrozenEncoder":
        path = Path(path)
        meta = fpqt.read_manifest(path.with_suffix(".manifest"))
        config = config_from_flat(meta)
        model = build_autoencoder(config, 0)
        arrays = fpqt.load(path)
        i = 0
        for layer in model.encoder:
            n = len(layer.arrays())
            layer.load_arrays(arrays[i:i + n])
            i += n
        if i != len(arrays):
            raise fpqt.FormatError(f"{path}: {len(arrays)} tensors, encoder expects {i}")
        return cls(config, model.encoder)


def freeze_encoder(model: AutoencoderModel) -> FrozenEncoder:
    model.frozen = True
    return FrozenEncoder(model.config, model.encoder)


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def fpqe_encode(handle: FrozenEncoder, x) -> np.ndarray:
    """Latent channels as unit-norm amplitude rows.

    ``x`` of shape (C,H,W) gives (c, L); a batch (N,C,H,W) gives (N, c, L),
    where L = h*w rounded up to a power of two (zero padded).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if x.shape[-3:] != tuple(handle.config.input_shape):
        raise ValueError(f"input shape {x.shape[-3:]} != configured {handle.config.input_shape}")
    z = handle.encode(x[None] if single else x)
    v = z.reshape(z.shape[0], z.shape[1], -1)
    width = next_pow2(v.shape[-1])
    if width != v.shape[-1]:
        v = np.pad(v, ((0, 0), (0, 0), (0, width - v.shape[-1])))
    norms = np.sqrt((v * v).sum(axis=-1, keepdims=True))
    bad = np.argwhere(norms[..., 0] == 0.0)
    if len(bad):
        s, k = bad[0]
        raise DegenerateChannelError(int(k), None if single else int(s))
    psi = v / norms
    return psi[0] if single else psi


# checkpoints ------------------------------------------------------------------

def config_to_flat(config: EncoderConfig) -> dict[str, object]:
    return {
        "input_shape": list(config.input_shape),
        "blocks": config.blocks_str(),
        "use_batchnorm": int(config.use_batchnorm),
        "latent_activation": config.latent_activation,
        "latent_shape": list(config.latent_shape),
        "bn_momentum": config.bn_momentum,
        "bn_eps": config.bn_eps,
        "allow_expansion": int(config.allow_expansion),
    }


def config_from_flat(meta: dict[str, str]) -> EncoderConfig:
    return EncoderConfig(
        input_shape=tuple(int(v) for v in meta["input_shape"].split(",")),
        blocks=EncoderConfig.parse_blocks(meta["blocks"]),
        use_batchnorm=bool(int(meta.get("use_batchnorm", "1"))),
        latent_activation=meta.get("latent_activation", "none"),
        bn_momentum=float(meta.get("bn_momentum", 0.1)),
        bn_eps=float(meta.get("bn_eps", 1e-5)),
        allow_expansion=bool(int(meta.get("allow_expansion", "0"))),
    )


def save_autoencoder(model: AutoencoderModel, path: str | Path) -> None:
    path = Path(path)
    fpqt.save(path, model.arrays())
    fpqt.write_manifest(path.with_suffix(".manifest"), {
        "kind": "autoencoder",
        **config_to_flat(model.config),
        "seed": model.seed,
        "epochs": model.epochs_trained,
        "final_loss": repr(model.final_loss),
    })


def load_autoencoder(path: str | Path) -> AutoencoderModel:
    path = Path(path)
    meta = fpqt.read_manifest(path.with_suffix(".manifest"))
    model = build_autoencoder(config_from_flat(meta), int(meta.get("seed", 0)))
    model.load_arrays(fpqt.load(path))
    model.epochs_trained = int(meta.get("epochs", 0))
    model.final_loss = float(meta.get("final_loss", "nan"))
    return model
