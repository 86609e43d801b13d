"""Binary weight checkpoints.

Layout (little-endian): ``b"SBNN"``, u32 version, u32 layer count; per
layer a u32 array count, then per array a u16 name length, the UTF-8
name, u32 ndim, ndim x u32 dims and the float32 data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SBNN"
VERSION = 1


def save_checkpoint(state: list[dict], path) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for layer in state:
        parts.append(struct.pack("<I", len(layer)))
        for name in sorted(layer):
            arr = np.asarray(layer[name], dtype="<f4")
            key = name.encode()
            parts.append(struct.pack("<H", len(key)) + key)
            parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
            parts.append(arr.tobytes())
    path = Path(path)
    try:
        path.write_bytes(b"".join(parts))
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> list[dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, n_layers = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    state = []
    for _ in range(n_layers):
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        layer = {}
        for _ in range(count):
            (klen,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + klen].decode()
            pos += klen
            (ndim,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", raw, pos)
            pos += 4 * ndim
            size = int(np.prod(shape))
            layer[name] = np.frombuffer(raw, "<f4", size, pos).reshape(shape).copy()
            pos += 4 * size
        state.append(layer)
    return state
