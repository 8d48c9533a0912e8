"""The tensor dump format: little-endian `SSLT` magic, u32 rank, u64 dims, f64 data."""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from sslforge.errors import DataError
from sslforge.utils import write_to_path

from .tensor import Array, Tensor

logger = logging.getLogger(__name__)

MAGIC = b"SSLT"


def encode_tensor(value: Tensor | ArrayLike) -> bytes:
    data = value.data if isinstance(value, Tensor) else np.asarray(value, np.float64)
    header = MAGIC + struct.pack("<I", data.ndim)
    header += struct.pack(f"<{data.ndim}Q", *data.shape)
    return header + np.ascontiguousarray(data, dtype="<f8").tobytes()


def decode_tensor(raw: bytes, source: str = "<bytes>") -> Array:
    if raw[:4] != MAGIC:
        raise DataError(f"{source}: not a tensor dump (bad magic {raw[:4]!r})")
    try:
        (rank,) = struct.unpack_from("<I", raw, 4)
        shape = struct.unpack_from(f"<{rank}Q", raw, 8)
    except struct.error as e:
        raise DataError(f"{source}: truncated header") from e

    offset = 8 + 8 * rank
    count = int(np.prod(shape, dtype=np.int64))
    if len(raw) - offset != 8 * count:
        raise DataError(
            f"{source}: payload has {len(raw) - offset} bytes, shape {shape} needs {8 * count}"
        )
    return np.frombuffer(raw, dtype="<f8", offset=offset).astype(np.float64).reshape(shape)


def write_tensor(path: Path, value: Tensor | ArrayLike):
    write_to_path(path, encode_tensor(value))


def read_tensor(path: Path) -> Array:
    return decode_tensor(path.read_bytes(), str(path))
