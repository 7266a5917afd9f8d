import struct
import zlib

import numpy as np
import pytest

from armin.checkpoint import (
    MAGIC,
    VERSION,
    dump_tensors,
    load_checkpoint,
    parse_tensors,
    save_checkpoint,
)
from armin.errors import CheckpointError


def example_tensors(seed=0):
    rng = np.random.default_rng(seed)
    return {
        "W": rng.standard_normal((3, 4)),
        "b": rng.standard_normal(4),
        "scalarish": rng.standard_normal(1),
    }


def test_roundtrip_is_bitwise(tmp_path):
    tensors = example_tensors()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, tensors)
    loaded = load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        assert loaded[name].shape == arr.shape
        assert np.array_equal(loaded[name], arr)
        assert loaded[name].tobytes() == arr.tobytes()


def test_crc_mismatch_refuses_to_load(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, example_tensors())
    blob = bytearray(path.read_bytes())
    blob[20] ^= 0xFF  # flip a payload byte
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="CRC"):
        load_checkpoint(path)


def test_truncated_file_rejected():
    with pytest.raises(CheckpointError):
        parse_tensors(b"ARMN\x01")


def test_bad_magic_rejected():
    tensors = {"t": np.zeros(2)}
    blob = bytearray(dump_tensors(tensors))
    blob[0:4] = b"NOPE"
    body = bytes(blob[:-4])
    blob = body + struct.pack("<I", zlib.crc32(body))
    with pytest.raises(CheckpointError, match="magic"):
        parse_tensors(blob)


def test_exact_byte_layout():
    # pin the wire format field by field for a one-tensor checkpoint
    arr = np.array([[1.5, -2.0]])
    blob = dump_tensors({"ab": arr})
    expected = b"".join([
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<I", 1),          # tensor count
        struct.pack("<H", 2),          # name length
        b"ab",
        struct.pack("<B", 2),          # rank
        struct.pack("<II", 1, 2),      # dims
        struct.pack("<2d", 1.5, -2.0),  # float64 little-endian payload
    ])
    assert blob[:-4] == expected
    assert blob[-4:] == struct.pack("<I", zlib.crc32(expected))


def test_zero_rank_tensor_roundtrip(tmp_path):
    path = tmp_path / "s.ckpt"
    save_checkpoint(path, {"s": np.asarray(3.25)})
    loaded = load_checkpoint(path)
    assert loaded["s"].shape == ()
    assert float(loaded["s"]) == 3.25
