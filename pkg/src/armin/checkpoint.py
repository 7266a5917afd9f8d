"""Portable binary checkpoints.

Layout, all little-endian:

    magic "ARMN" | version u32 | tensor count u32
    per tensor: name length u16 | name bytes (utf-8) | rank u8 |
                dims u32 each | data float64
    trailing CRC32 (u32) of every preceding byte

Round-trips are bitwise; a CRC mismatch refuses to load.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CheckpointError

MAGIC = b"ARMN"
VERSION = 1


def dump_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float64)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def parse_tensors(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < 16:
        raise CheckpointError(f"checkpoint truncated at {len(blob)} bytes")
    body, crc_bytes = blob[:-4], blob[-4:]
    (expected,) = struct.unpack("<I", crc_bytes)
    actual = zlib.crc32(body)
    if actual != expected:
        raise CheckpointError(
            f"checkpoint CRC mismatch: stored {expected:#010x}, "
            f"computed {actual:#010x}"
        )
    if body[:4] != MAGIC:
        raise CheckpointError(f"bad magic {body[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (count,) = struct.unpack_from("<I", body, 8)
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", body, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", body, offset)
        offset += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(body, dtype="<f8", count=size, offset=offset).copy()
        offset += 8 * size
        tensors[name] = data.reshape(dims)
    if offset != len(body):
        raise CheckpointError(f"{len(body) - offset} trailing bytes after tensors")
    return tensors


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_tensors(tensors))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return parse_tensors(fh.read())
