"""Portable weight checkpoints.

Byte layout (all integers little-endian)::

    offset 0   8 bytes   magic  b"ARQCKPT\\x00"
    offset 8   uint32    format version (currently 1)
    offset 12  uint32    header length N in bytes
    offset 16  N bytes   UTF-8 JSON header
    offset 16+N          payload

The JSON header holds ``format_version``, ``config_digest``, ``precision``
(training precision of the run, 32 or 64), ``config`` (the resolved run
config), ``step`` and ``tensors``: a list of ``{"name", "shape"}`` entries in
payload order. The payload is every tensor in that order, row-major, as
float32 little-endian, with no padding. Checkpoints are always float32
regardless of the training precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ARQCKPT\x00"
FORMAT_VERSION = 1
_F32 = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def save(path, tensors: list[tuple[str, np.ndarray]], *, config_digest: str, precision: int, **extra) -> Path:
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "config_digest": config_digest,
        "precision": int(precision),
        **extra,
        "tensors": [{"name": n, "shape": list(np.shape(a))} for n, a in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        f.write(blob)
        for _, a in tensors:
            f.write(np.ascontiguousarray(a, dtype=_F32).tobytes(order="C"))
    tmp.replace(path)
    return path


def read_header(path) -> dict:
    with open(path, "rb") as f:
        return _read_header(f)[0]


def _read_header(f) -> tuple[dict, int]:
    magic = f.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, n = struct.unpack("<II", f.read(8))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    return json.loads(f.read(n).decode("utf-8")), 16 + n


def load(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        header, _ = _read_header(f)
        tensors = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            raw = f.read(count * 4)
            if len(raw) != count * 4:
                raise CheckpointError(f"truncated payload at tensor {entry['name']}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype=_F32).reshape(shape).copy()
        if f.read(1):
            raise CheckpointError("trailing bytes after payload")
    return header, tensors
