from pathlib import Path

import numpy as np
import pytest
from sslforge.data import (
    derive_seed,
    gen_synthetic_dataset,
    image_seed,
    read_dataset,
    write_dataset,
)
from sslforge.data.io import MAGIC, encode_dataset
from sslforge.errors import DataError


def test_write_then_read(tmp_path: Path):
    data = gen_synthetic_dataset(n=6, classes=3, size=16, seed=0)
    path = tmp_path / "data" / "train.ssld"

    write_dataset(path, data)
    loaded = read_dataset(path)

    np.testing.assert_array_equal(loaded.images, data.images)
    np.testing.assert_array_equal(loaded.labels, data.labels)


def test_header_layout():
    data = gen_synthetic_dataset(n=2, classes=2, size=16, seed=0)
    raw = encode_dataset(data)

    assert raw[:4] == MAGIC
    assert np.frombuffer(raw, "<u4", 4, 4).tolist() == [2, 16, 16, 3]
    assert len(raw) == 20 + 2 * 2 + 4 * 2 * 16 * 16 * 3


def test_bad_magic(tmp_path: Path):
    path = tmp_path / "bad.ssld"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(DataError, match="magic"):
        read_dataset(path)


def test_truncated_file(tmp_path: Path):
    raw = encode_dataset(gen_synthetic_dataset(n=2, classes=2, size=16, seed=0))
    path = tmp_path / "short.ssld"
    path.write_bytes(raw[:-4])
    with pytest.raises(DataError):
        read_dataset(path)


def test_image_seeds_are_distinct_and_stable():
    seeds = {image_seed(0, i) for i in range(100)}
    assert len(seeds) == 100
    assert image_seed(0, 5, epoch=1) != image_seed(0, 5, epoch=0)
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
