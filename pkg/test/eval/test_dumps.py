from pathlib import Path

import numpy as np
import pytest
from sslforge.errors import DataError
from sslforge.eval import EmbeddingDump, read_embeddings, write_embeddings
from sslforge.tensor import Tensor


@pytest.fixture
def dump() -> EmbeddingDump:
    values = np.random.default_rng(0).normal(size=(6, 3))
    return EmbeddingDump.capture(
        Tensor(values, requires_grad=True),
        "projector",
        step=120,
        seed=7,
        split="val",
        labels=[0, 1, 2, 0, 1, 2],
    )


@pytest.mark.parametrize("suffix", ["", ".sslt", ".json", ".labels.sslt"])
def test_read_from_any_file(tmp_path: Path, dump: EmbeddingDump, suffix: str):
    write_embeddings(tmp_path / "emb", dump)
    loaded = read_embeddings(tmp_path / f"emb{suffix}")

    np.testing.assert_array_equal(loaded.values, dump.values)
    assert loaded.labels is not None and dump.labels is not None
    np.testing.assert_array_equal(loaded.labels, dump.labels)
    assert (loaded.tap, loaded.step, loaded.seed, loaded.split) == ("projector", 120, 7, "val")


def test_without_labels(tmp_path: Path):
    dump = EmbeddingDump.capture(np.eye(3), "backbone", step=0, seed=1)
    write_embeddings(tmp_path / "out" / "emb", dump)

    assert not (tmp_path / "out" / "emb.labels.sslt").exists()
    assert read_embeddings(tmp_path / "out" / "emb").labels is None


def test_capture_is_a_snapshot():
    source = np.zeros((2, 2))
    dump = EmbeddingDump.capture(source, "backbone", step=0, seed=0)
    source[0, 0] = 1.0
    assert dump.values[0, 0] == 0


def test_missing_sidecar(tmp_path: Path):
    with pytest.raises(DataError, match="sidecar"):
        read_embeddings(tmp_path / "nothing")


def test_sidecar_shape_mismatch(tmp_path: Path, dump: EmbeddingDump):
    write_embeddings(tmp_path / "emb", dump)
    write_embeddings(tmp_path / "other", EmbeddingDump.capture(np.eye(2), "projector", step=0, seed=0))
    (tmp_path / "other.sslt").replace(tmp_path / "emb.sslt")

    with pytest.raises(DataError, match="disagrees"):
        read_embeddings(tmp_path / "emb")


@pytest.mark.parametrize(
    "values",
    [np.array([[np.inf, 0.0]]), np.zeros((0, 3)), np.zeros(3)],
    ids=["inf", "empty", "vector"],
)
def test_invalid_values(values: np.ndarray):
    with pytest.raises(DataError):
        EmbeddingDump.capture(values, "backbone", step=0, seed=0)
