"""IDX files (the MNIST container format), optionally gzip-compressed.

Layout, all integers big-endian:

    u32 magic    0x00000800 | ndim   (type byte 0x08 = unsigned byte)
    u32 dims[ndim]
    u8  data[prod(dims)]

Image files have magic 2051 (three dims N x rows x cols), label files 2049
(one dim N). Only unsigned-byte payloads are supported.
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, IdxIOError

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
_UBYTE = 0x08


def _read_bytes(path) -> bytes:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IdxIOError(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise IdxIOError(f"{path}: damaged gzip stream ({exc})") from exc
    return raw


def parse_idx(raw: bytes, source: str = "<bytes>", expect: int | None = None) -> np.ndarray:
    if len(raw) == 0:
        raise IdxIOError(f"{source}: empty file")
    if len(raw) < 4:
        raise IdxIOError(f"{source}: truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != _UBYTE or magic & 0xFF == 0:
        raise FormatError(f"{source}: bad magic number {magic:#010x}")
    if expect is not None and magic != expect:
        raise FormatError(f"{source}: magic {magic} where {expect} was expected")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise IdxIOError(f"{source}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) < head + size:
        raise IdxIOError(f"{source}: truncated payload ({len(raw) - head} of {size} bytes)")
    if len(raw) > head + size:
        raise FormatError(f"{source}: {len(raw) - head - size} trailing bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=head).reshape(dims).copy()


def read_idx(path, expect: int | None = None) -> np.ndarray:
    """Raw uint8 array; ``expect`` pins the magic number."""
    return parse_idx(_read_bytes(path), str(path), expect)


def encode_idx(array) -> bytes:
    a = np.asarray(array)
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 255 or not np.array_equal(a, np.round(a))):
            raise FormatError("IDX unsigned-byte payload needs integers in [0, 255]")
        a = a.astype(np.uint8)
    if not 1 <= a.ndim <= 255:
        raise FormatError(f"IDX needs 1..255 dimensions, got {a.ndim}")
    header = struct.pack(">I", (_UBYTE << 8) | a.ndim) + struct.pack(f">{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a).tobytes()


def write_idx(path, array) -> None:
    """Write an IDX file; a ``.gz`` suffix gzips it (with a zero timestamp, so output is reproducible)."""
    data = encode_idx(array)
    path = Path(path)
    if path.suffix == ".gz":
        data = gzip.compress(data, mtime=0)
    path.write_bytes(data)


def idx_summary(path) -> dict:
    """Header fields of an IDX file (for the idx-dump command)."""
    raw = _read_bytes(path)
    arr = parse_idx(raw, str(path))
    magic = struct.unpack(">I", raw[:4])[0]
    kind = {IMAGES_MAGIC: "images", LABELS_MAGIC: "labels"}.get(magic, "other")
    return {"path": str(path), "magic": magic, "kind": kind, "dims": list(arr.shape),
            "min": int(arr.min()) if arr.size else None, "max": int(arr.max()) if arr.size else None}
