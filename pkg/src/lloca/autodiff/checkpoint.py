"""Flat binary parameter checkpoints.

Layout (all integers little-endian):

    magic     4 bytes  b"LLCP"
    version   u32      currently 1
    count     u32      number of parameters
    per parameter:
        name_len  u16
        name      utf-8 bytes
        rank      u8
        dims      rank * u32
        payload   prod(dims) * f64 little-endian
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"LLCP"
VERSION = 1


def save_checkpoint(path, params: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(params)))
        for name, value in params.items():
            arr = np.ascontiguousarray(value, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated checkpoint: wanted {n} bytes, got {len(buf)}")
    return buf


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise FormatError("bad checkpoint magic")
        version, count = struct.unpack("<II", _read_exact(fh, 8))
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank))
            n = int(np.prod(dims)) if rank else 1
            payload = _read_exact(fh, 8 * n)
            params[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
        return params
