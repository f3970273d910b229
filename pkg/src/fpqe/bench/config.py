"""Experiment configuration: flat ``key=value`` files with dotted section prefixes.

Every knob has a default here; the fully resolved config is written next to
each result so runs are self-describing.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .. import fpqt
from ..baselines import EncoderSpec, spec_for

DATASETS = ("mnist", "fashion", "cifar10")

DEFAULT_PAIRS = {
    "mnist": ((0, 1), (0, 3), (2, 4), (5, 6), (2, 8)),
    "fashion": ((0, 1), (2, 8), (3, 9), (7, 9)),
    "cifar10": ((0, 1),),
}

# qubit settings swept for the fidelity table
FIDELITY_QUBITS = {"angle": (6, 9), "amplitude": (6, 8), "pca": (6, 9), "sqe": (6, 9), "atp": (9,)}


@dataclass(frozen=True)
class AeParams:
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 16
    latent_channels: int = 8
    preset: str = "desk"  # "desk": c x 4 x 4 latent; "wide": c x 8 x 8


@dataclass(frozen=True)
class QnnParams:
    layers: int = 2
    depth: int = 2
    epochs: int = 50
    lr: float = 0.05
    batch_size: int = 32
    readout: str = "z0"
    init_scale: float = math.pi


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "mnist"
    pair: tuple[int, int] = (0, 1)
    encoder: EncoderSpec = field(default_factory=lambda: spec_for("fpqe"))
    ae: AeParams = field(default_factory=AeParams)
    qnn: QnnParams = field(default_factory=QnnParams)
    n_train: int = 500
    n_test: int = 200
    seed: int = 0
    data_paths: tuple[tuple[str, str], ...] = ()
    output_dir: str = "runs"
    # sweep settings, ignored by single-cell commands
    sweep_datasets: tuple[str, ...] = ("mnist",)
    sweep_encoders: tuple[str, ...] = ("angle", "amplitude", "pca", "sqe", "atp", "fpqe")
    sweep_pairs: tuple[tuple[str, tuple[tuple[int, int], ...]], ...] = tuple(DEFAULT_PAIRS.items())
    cifar_sample_scale: float = 0.5

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.pair[0] == self.pair[1]:
            raise ValueError("pair labels must differ")

    def data_path(self, dataset: str | None = None) -> str | None:
        return dict(self.data_paths).get(dataset or self.dataset)

    def pairs_for(self, dataset: str) -> tuple[tuple[int, int], ...]:
        return dict(self.sweep_pairs).get(dataset, DEFAULT_PAIRS[dataset])

    # flat key/value form ------------------------------------------------

    def to_flat(self, include_sweep: bool = True) -> dict[str, str]:
        e = self.encoder
        flat = {
            "dataset": self.dataset,
            "pair": f"{self.pair[0]},{self.pair[1]}",
            "encoder.kind": e.kind,
            "encoder.qubits": str(e.qubits),
            "encoder.latent_shape": ",".join(str(v) for v in e.latent_shape),
            "encoder.pruning": str(int(e.pruning)),
            "encoder.keep_fraction": repr(e.keep_fraction),
            "encoder.pca_mode": e.pca_mode,
            "n_train": str(self.n_train),
            "n_test": str(self.n_test),
            "seed": str(self.seed),
        }
        for prefix, group in (("ae", self.ae), ("qnn", self.qnn)):
            for f in fields(group):
                flat[f"{prefix}.{f.name}"] = _fmt(getattr(group, f.name))
        if include_sweep:
            for name, path in self.data_paths:
                flat[f"data.{name}"] = path
            flat["output_dir"] = self.output_dir
            flat["sweep.datasets"] = ",".join(self.sweep_datasets)
            flat["sweep.encoders"] = ",".join(self.sweep_encoders)
            for name, pairs in self.sweep_pairs:
                flat[f"sweep.pairs.{name}"] = " ".join(f"{a}-{b}" for a, b in pairs)
            flat["sweep.cifar_sample_scale"] = repr(self.cifar_sample_scale)
        return flat

    @classmethod
    def from_flat(cls, flat: dict[str, str], base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        cfg = base or cls()
        known = set(cfg.to_flat()) | {"encoder.qubits", "encoder.latent_shape"}
        unknown = [k for k in flat if k not in known and not k.startswith(("data.", "sweep.pairs."))]
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")

        def get(key, default):
            return flat.get(key, default)

        kw: dict = {}
        if "dataset" in flat:
            kw["dataset"] = flat["dataset"]
        if "pair" in flat:
            kw["pair"] = _parse_pair(flat["pair"])
        for key in ("n_train", "n_test", "seed"):
            if key in flat:
                kw[key] = int(flat[key])
        if "output_dir" in flat:
            kw["output_dir"] = flat["output_dir"]

        enc_keys = [k for k in flat if k.startswith("encoder.")]
        if enc_keys:
            kind = get("encoder.kind", cfg.encoder.kind)
            extra = {}
            if "encoder.keep_fraction" in flat:
                extra["keep_fraction"] = float(flat["encoder.keep_fraction"])
            if "encoder.pca_mode" in flat:
                extra["pca_mode"] = flat["encoder.pca_mode"]
            qubits = int(flat["encoder.qubits"]) if "encoder.qubits" in flat and kind != "fpqe" else None
            spec = spec_for(kind, qubits, **extra)
            if "encoder.latent_shape" in flat and kind != "fpqe":
                shape = tuple(int(v) for v in flat["encoder.latent_shape"].split(","))
                if shape != spec.latent_shape:
                    spec = EncoderSpec(kind, spec.qubits, shape, spec.pruning, spec.keep_fraction, spec.pca_mode)
            kw["encoder"] = spec

        for prefix, attr in (("ae", "ae"), ("qnn", "qnn")):
            group = getattr(cfg, attr)
            changes = {}
            for f in fields(group):
                key = f"{prefix}.{f.name}"
                if key in flat:
                    changes[f.name] = type(getattr(group, f.name))(flat[key])
            if changes:
                kw[attr] = replace(group, **changes)

        paths = dict(cfg.data_paths)
        paths.update({k[5:]: v for k, v in flat.items() if k.startswith("data.")})
        kw["data_paths"] = tuple(sorted(paths.items()))
        if "sweep.datasets" in flat:
            kw["sweep_datasets"] = tuple(s for s in flat["sweep.datasets"].split(",") if s)
        if "sweep.encoders" in flat:
            kw["sweep_encoders"] = tuple(s for s in flat["sweep.encoders"].split(",") if s)
        pairs = dict(cfg.sweep_pairs)
        for k, v in flat.items():
            if k.startswith("sweep.pairs."):
                pairs[k[len("sweep.pairs."):]] = tuple(_parse_pair(p.replace("-", ",")) for p in v.split())
        kw["sweep_pairs"] = tuple(pairs.items())
        if "sweep.cifar_sample_scale" in flat:
            kw["cifar_sample_scale"] = float(flat["sweep.cifar_sample_scale"])
        return replace(cfg, **kw)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_flat(fpqt.parse_kv(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        fpqt.write_manifest(path, self.to_flat())

    def override(self, **flat) -> "ExperimentConfig":
        return ExperimentConfig.from_flat({k: str(v) for k, v in flat.items()}, base=self)

    # identity -------------------------------------------------------------

    def fingerprint(self) -> str:
        """Hash of everything that determines a result; paths and output dirs excluded."""
        return _digest(self.to_flat(include_sweep=False))

    def ae_fingerprint(self) -> str:
        flat = self.to_flat(include_sweep=False)
        keep = {k: v for k, v in flat.items()
                if k.startswith("ae.") or k in ("dataset", "pair", "n_train", "n_test", "seed")}
        return _digest(keep)


def _digest(flat: dict[str, str]) -> str:
    blob = "\n".join(f"{k}={flat[k]}" for k in sorted(flat)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _parse_pair(text: str) -> tuple[int, int]:
    a, b = (int(v) for v in text.replace(" ", "").split(","))
    return (a, b)
