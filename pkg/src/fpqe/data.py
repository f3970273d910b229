"""MNIST/FashionMNIST IDX and CIFAR-10 binary readers, plus label-pair subsets."""

from __future__ import annotations

import gzip
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 3 * 32 * 32

# file names as distributed
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}


class ParseError(ValueError):
    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = path
        self.offset = offset


class MissingDataError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class LabeledImage:
    pixels: np.ndarray  # (C, H, W) in [0, 1]
    label: int


@dataclass
class ImageSet:
    """Images as one (N, C, H, W) float array plus integer labels."""
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> LabeledImage:
        return LabeledImage(self.images[i], int(self.labels[i]))

    def __iter__(self) -> Iterator[LabeledImage]:
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "ImageSet":
        idx = np.asarray(idx, dtype=np.int64)
        return ImageSet(self.images[idx], self.labels[idx])


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _resolve(path) -> Path:
    path = Path(path)
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz
    raise MissingDataError(f"{path} not found (also tried {gz.name})")


def parse_idx(raw: bytes, expect_magic: int, path="<bytes>") -> np.ndarray:
    if len(raw) < 4:
        raise ParseError(path, 0, "file shorter than the 4-byte magic number")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expect_magic:
        raise ParseError(path, 0, f"bad magic 0x{magic:08x}, expected 0x{expect_magic:08x}")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise ParseError(path, 4, f"truncated header, need {ndim} dimension words")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    want = int(np.prod(dims, dtype=np.int64))
    have = len(raw) - head
    if have < want:
        raise ParseError(path, len(raw), f"truncated payload: header promises {want} bytes, found {have}")
    if have > want:
        raise ParseError(path, head + want, f"{have - want} trailing bytes after payload")
    return np.frombuffer(raw, dtype=np.uint8, offset=head).reshape(dims)


def encode_idx(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    magic = 0x00000800 | arr.ndim
    return struct.pack(f">I{arr.ndim}I", magic, *arr.shape) + arr.tobytes()


def load_idx(images_path, labels_path) -> ImageSet:
    """Read an IDX image/label file pair (optionally gzip-compressed)."""
    images_path, labels_path = _resolve(images_path), _resolve(labels_path)
    imgs = parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    labs = parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, labels_path)
    if imgs.shape[0] != labs.shape[0]:
        raise ParseError(labels_path, 4, f"label count {labs.shape[0]} != image count {imgs.shape[0]}")
    pixels = imgs[:, None, :, :].astype(np.float64) / 255.0
    return ImageSet(pixels, labs.astype(np.int64))


def write_idx(images_path, labels_path, images: ImageSet | np.ndarray, labels=None,
              compress: bool = False) -> None:
    """Inverse of :func:`load_idx`; pixels are mapped back with round(x * 255)."""
    if isinstance(images, ImageSet):
        images, labels = images.images, images.labels
    raw = to_bytes(images)
    if raw.ndim == 4:
        raw = raw[:, 0]
    for path, payload in ((images_path, encode_idx(raw)),
                          (labels_path, encode_idx(np.asarray(labels)))):
        Path(path).write_bytes(gzip.compress(payload, mtime=0) if compress else payload)


def to_bytes(pixels: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(pixels) * 255.0).astype(np.uint8)


def parse_cifar10(raw: bytes, path="<bytes>") -> ImageSet:
    if len(raw) % CIFAR_RECORD:
        raise ParseError(path, len(raw) - len(raw) % CIFAR_RECORD,
                         f"length {len(raw)} is not a multiple of the {CIFAR_RECORD}-byte record")
    if not raw:
        log.warning("%s: empty CIFAR-10 batch", path)
        return ImageSet(np.zeros((0, 3, 32, 32)), np.zeros(0, dtype=np.int64))
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise ParseError(path, bad * CIFAR_RECORD, f"label {labels[bad]} out of range")
    # payload is channel planar: 1024 R, 1024 G, 1024 B, each row-major
    pixels = rec[:, 1:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return ImageSet(pixels, labels)


def encode_cifar10(images: ImageSet) -> bytes:
    raw = to_bytes(images.images).reshape(len(images), -1)
    rec = np.concatenate([np.asarray(images.labels, dtype=np.uint8)[:, None], raw], axis=1)
    return rec.tobytes()


def load_cifar10(paths: Sequence[str | os.PathLike]) -> ImageSet:
    parts = [parse_cifar10(_read_bytes(_resolve(p)), p) for p in paths]
    return ImageSet(np.concatenate([p.images for p in parts]),
                    np.concatenate([p.labels for p in parts]))


def load_dataset(name: str, root: str | os.PathLike, split: str = "train") -> ImageSet:
    """Load ``mnist``, ``fashion`` or ``cifar10`` from a directory of distribution files."""
    root = Path(root)
    if name in ("mnist", "fashion"):
        img, lab = MNIST_FILES[split]
        try:
            return load_idx(root / img, root / lab)
        except MissingDataError as e:
            raise MissingDataError(
                f"{e}. Expected IDX files {img} and {lab} (raw or .gz) in {root}; "
                f"IDX = big-endian header with magic 0x803/0x801") from None
    if name == "cifar10":
        try:
            return load_cifar10([root / f for f in CIFAR_FILES[split]])
        except MissingDataError as e:
            raise MissingDataError(
                f"{e}. Expected CIFAR-10 binary batches {', '.join(CIFAR_FILES[split])} in {root}; "
                f"each record is 1 label byte + 3072 channel-planar pixel bytes") from None
    raise ValueError(f"unknown dataset {name!r}")


@dataclass
class PairDataset:
    images: np.ndarray
    labels: np.ndarray  # remapped: lower original id -> 0
    original_labels: np.ndarray
    indices: np.ndarray  # positions in the source ImageSet
    pair: tuple[int, int]
    split: str
    seed: int

    def __len__(self) -> int:
        return len(self.labels)


def make_pair(data: ImageSet, a: int, b: int, n_train: int = 500, n_test: int = 200,
              seed: int = 0, test_data: ImageSet | None = None) -> tuple[PairDataset, PairDataset]:
    """Class-balanced, seed-deterministic, disjoint train/test subsets of a label pair.

    When ``test_data`` is given the test split is drawn from it instead of
    from the remainder of ``data``.
    """
    if a == b:
        raise ValueError("pair labels must differ")
    lo, hi = sorted((a, b))
    rng = np.random.default_rng(seed)

    def per_class(n):
        return {lo: n - n // 2, hi: n // 2}

    train_idx, test_idx = [], []
    tr_n, te_n = per_class(n_train), per_class(n_test)
    for cls in (lo, hi):
        pool = np.flatnonzero(data.labels == cls)
        pool = pool[rng.permutation(len(pool))]
        if test_data is None:
            need = tr_n[cls] + te_n[cls]
            if len(pool) < need:
                raise ValueError(f"class {cls}: need {need} samples ({tr_n[cls]} train + "
                                 f"{te_n[cls]} test), only {len(pool)} available")
            train_idx.append(pool[:tr_n[cls]])
            test_idx.append(pool[tr_n[cls]:need])
        else:
            if len(pool) < tr_n[cls]:
                raise ValueError(f"class {cls}: need {tr_n[cls]} train samples, only {len(pool)} available")
            train_idx.append(pool[:tr_n[cls]])
            tpool = np.flatnonzero(test_data.labels == cls)
            tpool = tpool[rng.permutation(len(tpool))]
            if len(tpool) < te_n[cls]:
                raise ValueError(f"class {cls}: need {te_n[cls]} test samples, only {len(tpool)} available")
            test_idx.append(tpool[:te_n[cls]])

    def build(idx_parts, src, split):
        idx = np.concatenate(idx_parts)
        idx = idx[rng.permutation(len(idx))]
        orig = src.labels[idx]
        return PairDataset(src.images[idx], (orig == hi).astype(np.int64), orig, idx,
                           (lo, hi), split, seed)

    train = build(train_idx, data, "train")
    test = build(test_idx, test_data if test_data is not None else data, "test")
    return train, test


def mlxtend_mnist_subset() -> ImageSet:
    """The 5000-image MNIST sample (500 per digit) bundled with mlxtend."""
    try:
        import mlxtend
    except ImportError as e:
        raise MissingDataError("mlxtend is not installed; `pip install mlxtend` "
                               "or point the config at real MNIST IDX files") from e
    path = Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz"
    table = np.loadtxt(path, delimiter=",", dtype=np.float64)
    pixels = table[:, :-1].reshape(-1, 1, 28, 28) / 255.0
    return ImageSet(pixels, table[:, -1].astype(np.int64))


def export_mlxtend_mnist(out_dir: str | os.PathLike) -> Path:
    """Write the mlxtend MNIST sample as train IDX files; returns the directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    img, lab = MNIST_FILES["train"]
    if not (out_dir / img).exists():
        write_idx(out_dir / img, out_dir / lab, mlxtend_mnist_subset())
    return out_dir
