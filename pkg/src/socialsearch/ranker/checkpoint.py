"""Versioned binary model checkpoints.

Layout (little-endian): ``b"SSTT"``, version byte, u32 config length + JSON
config, u32 tensor count, then per tensor (sorted by name) a u16 name
length + UTF-8 name, u8 dtype code, u8 ndim, u64 per dim, raw data; a
CRC32 of everything before closes the file.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch

from .model import ModelConfig, TwoTowerModel

MAGIC = b"SSTT"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int64"): 2}


class CheckpointError(ValueError):
    pass


def to_bytes(model: TwoTowerModel) -> bytes:
    out = bytearray(MAGIC)
    out.append(VERSION)
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    out += struct.pack("<I", len(cfg)) + cfg
    state = model.state_dict()
    out += struct.pack("<I", len(state))
    for name in sorted(state):
        arr = state[name].detach().cpu().numpy()
        code = _CODES[arr.dtype]
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<BB", code, arr.ndim)
        out += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        out += np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


def from_bytes(data: bytes) -> TwoTowerModel:
    if len(data) < 9 or data[:4] != MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    if data[4] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {data[4]}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CheckpointError("checkpoint checksum mismatch (truncated or corrupt file)")
    try:
        pos = 5
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        config = ModelConfig.from_dict(json.loads(data[pos : pos + n]))
        pos += n
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        state = {}
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + ln].decode("utf-8")
            pos += ln
            code, ndim = struct.unpack_from("<BB", data, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}Q", data, pos)
            pos += 8 * ndim
            dt = _DTYPES[code]
            size = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
            arr = np.frombuffer(data, dtype=dt, count=size // dt.itemsize, offset=pos).reshape(shape)
            pos += size
            state[name] = torch.from_numpy(arr.copy())
    except (struct.error, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    model = TwoTowerModel(config)
    if any(t.dtype == torch.float64 for t in state.values()):
        model = model.double()
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint does not match its config: {exc}") from exc
    model.eval()
    return model


def save(model: TwoTowerModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load(path) -> TwoTowerModel:
    return from_bytes(Path(path).read_bytes())
