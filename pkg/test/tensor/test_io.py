import struct
from pathlib import Path

import numpy as np
import pytest
from sslforge.errors import DataError
from sslforge.tensor import Tensor, read_tensor, write_tensor
from sslforge.tensor.io import encode_tensor


def test_header_layout():
    raw = encode_tensor(np.zeros((2, 3)))

    assert raw[:4] == b"SSLT"
    assert struct.unpack_from("<I", raw, 4) == (2,)
    assert struct.unpack_from("<2Q", raw, 8) == (2, 3)
    assert len(raw) == 4 + 4 + 16 + 6 * 8


def test_file_round_trip(tmp_path: Path):
    values = np.random.default_rng(0).normal(size=(4, 2, 3))
    path = tmp_path / "nested" / "z.sslt"

    write_tensor(path, Tensor(values))

    np.testing.assert_array_equal(read_tensor(path), values)


def test_bad_magic(tmp_path: Path):
    path = tmp_path / "bad.sslt"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(DataError):
        read_tensor(path)


def test_truncated_payload(tmp_path: Path):
    path = tmp_path / "short.sslt"
    path.write_bytes(encode_tensor(np.ones(4))[:-8])
    with pytest.raises(DataError):
        read_tensor(path)
