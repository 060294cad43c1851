"""Versioned binary checkpoints.

    8 bytes   magic b"EQGRADCK"
    u32       format version
    u32       metadata length L, then L bytes of UTF-8 JSON (model config etc.)
    u32       tensor count
    per tensor:
      u32 name length, name (UTF-8), u32 rank, u32 dims[rank],
      prod(dims) big-endian binary64 values
    u32       CRC-32 of every preceding byte

All integers are big-endian. Loading restores parameters bit-exactly.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptionError, FormatError

MAGIC = b"EQGRADCK"
VERSION = 1


def encode_checkpoint(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_raw = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack(">II", VERSION, len(meta_raw)), meta_raw, struct.pack(">I", len(tensors))]
    for name, value in tensors.items():
        a = np.asarray(value, dtype=np.float64)
        raw_name = name.encode("utf-8")
        parts.append(struct.pack(">I", len(raw_name)) + raw_name)
        parts.append(struct.pack(f">I{a.ndim}I", a.ndim, *a.shape))
        parts.append(a.astype(">f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack(">I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptionError("checkpoint ends early")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]


def decode_checkpoint(raw: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if raw[: len(MAGIC)] != MAGIC[: len(raw)] or len(raw) == 0:
        raise FormatError("not a checkpoint file (bad magic)")
    if len(raw) < len(MAGIC) + 8:
        raise CorruptionError("checkpoint ends early")
    (version,) = struct.unpack(">I", raw[8:12])
    if version != VERSION:
        raise FormatError(f"checkpoint format version {version}, this build reads version {VERSION}")
    body, tail = raw[:-4], raw[-4:]
    if zlib.crc32(body) != struct.unpack(">I", tail)[0]:
        raise CorruptionError("checkpoint checksum mismatch (file truncated or modified)")
    r = _Reader(body)
    r.take(12)
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    tensors = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        dims = struct.unpack(f">{rank}I", r.take(4 * rank))
        count = int(np.prod(dims, dtype=np.int64))
        tensors[name] = np.frombuffer(r.take(8 * count), dtype=">f8").astype(np.float64).reshape(dims)
    if r.pos != len(body):
        raise CorruptionError(f"{len(body) - r.pos} unexpected bytes after the last tensor")
    return meta, tensors


def checkpoint_save(model, path, meta: dict | None = None) -> None:
    tensors = {p.name: p.value for p in model.parameters()}
    if len(tensors) != len(model.parameters()):
        raise FormatError("model has duplicate parameter names")
    Path(path).write_bytes(encode_checkpoint(tensors, meta))


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    return decode_checkpoint(Path(path).read_bytes())


def checkpoint_load(model, path) -> dict:
    """Copy stored tensors into ``model`` in place; returns the metadata.

    Names and shapes must match the model's parameters one for one, in order.
    """
    meta, tensors = read_checkpoint(path)
    params = model.parameters()
    stored = list(tensors.items())
    for i in range(max(len(params), len(stored))):
        want = params[i].name if i < len(params) else "<none>"
        got = stored[i][0] if i < len(stored) else "<none>"
        if want != got:
            raise FormatError(f"tensor #{i}: model expects {want!r}, checkpoint has {got!r}")
        if params[i].shape != stored[i][1].shape:
            raise FormatError(f"tensor {want!r}: model shape {params[i].shape}, checkpoint {stored[i][1].shape}")
    for p, (_, value) in zip(params, stored):
        p.value[...] = value
    return meta
