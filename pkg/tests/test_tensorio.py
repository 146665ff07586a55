import struct

import numpy as np
import pytest

from vciedit.errors import FormatError
from vciedit.tensorio import decode_tensor, encode_tensor, load_tensor, load_tensor_set, store_tensor


def test_roundtrip_bitwise(tmp_path, rng):
    for shape in ((), (5,), (3, 4), (2, 1, 3)):
        x = rng.standard_normal(shape)
        store_tensor(tmp_path / "x.vct", x)
        y = load_tensor(tmp_path / "x.vct")
        assert y.shape == x.shape and y.tobytes() == x.tobytes()


def test_layout():
    buf = encode_tensor(np.array([[1.0, 2.0]]))
    assert buf[:4] == b"VCT1"
    assert struct.unpack("<I2Q", buf[4:24]) == (2, 1, 2)
    assert struct.unpack("<2d", buf[24:]) == (1.0, 2.0)


def test_bad_magic():
    with pytest.raises(FormatError):
        decode_tensor(b"VCT2" + encode_tensor(np.zeros(2))[4:])


def test_count_mismatch():
    buf = encode_tensor(np.zeros(3))
    with pytest.raises(FormatError):
        decode_tensor(buf[:-8])
    with pytest.raises(FormatError):
        decode_tensor(buf + b"\0" * 8)


def test_truncated_header_and_rank_limit():
    with pytest.raises(FormatError):
        decode_tensor(b"VCT1" + struct.pack("<I", 3) + b"\0" * 8)
    with pytest.raises(FormatError):
        decode_tensor(b"VCT1" + struct.pack("<I", 2**31))
    with pytest.raises(FormatError):
        decode_tensor(b"VCT1" + struct.pack("<I2Q", 2, 2**40, 2**40))


def test_directory_set(tmp_path):
    for i in range(3):
        store_tensor(tmp_path / f"{i:02d}.vct", np.full(2, float(i)))
    (tmp_path / "notes.txt").write_text("ignored")
    np.testing.assert_array_equal(load_tensor_set(tmp_path), [[0, 0], [1, 1], [2, 2]])
    with pytest.raises(FormatError):
        load_tensor_set(tmp_path / "notes.txt")
