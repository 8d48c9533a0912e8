"""The SSLD dataset file: `SSLD` magic, u32 count/H/W/C, u16 labels, f32 pixels."""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from sslforge.errors import DataError
from sslforge.utils import write_to_path

from .synthetic import LabeledImages

logger = logging.getLogger(__name__)

MAGIC = b"SSLD"
_HEADER = struct.Struct("<4s4I")


def encode_dataset(dataset: LabeledImages) -> bytes:
    count, height, width, channels = dataset.images.shape
    if count and int(dataset.labels.max()) > np.iinfo(np.uint16).max:
        raise DataError("Labels do not fit in u16")
    return b"".join(
        [
            _HEADER.pack(MAGIC, count, height, width, channels),
            np.ascontiguousarray(dataset.labels, dtype="<u2").tobytes(),
            np.ascontiguousarray(dataset.images, dtype="<f4").tobytes(),
        ]
    )


def decode_dataset(raw: bytes, source: str = "<bytes>") -> LabeledImages:
    if len(raw) < _HEADER.size:
        raise DataError(f"{source}: truncated header")
    magic, count, height, width, channels = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{source}: not a dataset file (bad magic {magic!r})")

    label_bytes = 2 * count
    pixel_count = count * height * width * channels
    expected = _HEADER.size + label_bytes + 4 * pixel_count
    if len(raw) != expected:
        raise DataError(f"{source}: expected {expected} bytes, got {len(raw)}")

    labels = np.frombuffer(raw, "<u2", count, _HEADER.size).astype(np.int64)
    images = np.frombuffer(raw, "<f4", pixel_count, _HEADER.size + label_bytes)
    images = images.astype(np.float32).reshape(count, height, width, channels)
    if not np.isfinite(images).all():
        raise DataError(f"{source}: non-finite pixel values")
    return LabeledImages(images, labels)


def write_dataset(path: Path, dataset: LabeledImages):
    logger.debug(f"Writing {len(dataset)} images to {path}")
    write_to_path(path, encode_dataset(dataset))


def read_dataset(path: Path) -> LabeledImages:
    return decode_dataset(path.read_bytes(), str(path))


def train_val_split(
    dataset: LabeledImages,
    val_fraction: float,
) -> tuple[LabeledImages, LabeledImages]:
    return dataset.split(val_fraction)
