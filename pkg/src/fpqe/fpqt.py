"""FPQT tensor container and key=value text manifests.

A record is ``b"FPQT"``, version (u32), rank (u32), ``rank`` dims (u32),
then ``prod(dims)`` little-endian float64 values.  A container file is a
plain concatenation of records; the manifest next to it names them.
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

import numpy as np

MAGIC = b"FPQT"
VERSION = 1


class FormatError(ValueError):
    pass


def write_tensor(f: BinaryIO, arr: np.ndarray) -> None:
    if np.iscomplexobj(arr):
        raise FormatError("complex arrays must be packed with pack_complex before saving")
    arr = np.asarray(arr, dtype="<f8")
    f.write(MAGIC)
    f.write(struct.pack("<II", VERSION, arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(np.ascontiguousarray(arr).tobytes())


def read_tensor(f: BinaryIO) -> np.ndarray | None:
    """Read one record, or return None at a clean end of file."""
    start = f.tell() if f.seekable() else -1
    magic = f.read(4)
    if not magic:
        return None
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte {start}")
    head = f.read(8)
    if len(head) != 8:
        raise FormatError(f"truncated header at byte {start}")
    version, rank = struct.unpack("<II", head)
    if version != VERSION:
        raise FormatError(f"unsupported FPQT version {version}")
    dims_raw = f.read(4 * rank)
    if len(dims_raw) != 4 * rank:
        raise FormatError(f"truncated dims at byte {start}")
    dims = struct.unpack(f"<{rank}I", dims_raw)
    count = int(np.prod(dims, dtype=np.int64))
    payload = f.read(8 * count)
    if len(payload) != 8 * count:
        raise FormatError(f"truncated payload at byte {start}: wanted {8 * count} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)


def dumps(arrays: Iterable[np.ndarray]) -> bytes:
    buf = io.BytesIO()
    for a in arrays:
        write_tensor(buf, a)
    return buf.getvalue()


def loads(blob: bytes) -> list[np.ndarray]:
    buf = io.BytesIO(blob)
    out = []
    while (t := read_tensor(buf)) is not None:
        out.append(t)
    return out


def save(path: str | os.PathLike, arrays: Iterable[np.ndarray]) -> None:
    """Write atomically: a reader never sees a half-written container."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(arrays))
    os.replace(tmp, path)


def load(path: str | os.PathLike) -> list[np.ndarray]:
    return loads(Path(path).read_bytes())


def pack_complex(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    return np.stack([arr.real, arr.imag], axis=-1)


def unpack_complex(arr: np.ndarray) -> np.ndarray:
    return arr[..., 0] + 1j * arr[..., 1]


# manifests ------------------------------------------------------------------

def format_kv(items: Mapping[str, object]) -> str:
    lines = []
    for k, v in items.items():
        if isinstance(v, (list, tuple)):
            v = ",".join(str(x) for x in v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_manifest(path: str | os.PathLike, items: Mapping[str, object]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(format_kv(items), encoding="utf-8")
    os.replace(tmp, path)


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))
