"""Embedding dumps: `<stem>.sslt` values, optional `<stem>.labels.sslt` and a
`<stem>.json` sidecar naming the tap, step, seed and split."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from sslforge.core.base import ForgeModel
from sslforge.errors import DataError
from sslforge.nets import TapName
from sslforge.tensor import Array, Tensor, read_tensor, write_tensor
from sslforge.utils import write_to_path

logger = logging.getLogger(__name__)

Split = Literal["train", "val", "eval"]


class DumpManifest(ForgeModel):
    tap: TapName
    step: int
    seed: int
    split: Split = "eval"
    rows: int
    dim: int
    has_labels: bool = False


@dataclass(frozen=True)
class EmbeddingDump:
    values: Array
    tap: TapName
    step: int
    seed: int
    split: Split = "eval"
    labels: Array | None = None

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.values) < 1:
            raise DataError(f"Embedding dump needs an (n >= 1, d) matrix, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise DataError("Embedding dump contains NaN or Inf")
        if self.labels is not None and self.labels.shape != (len(self.values),):
            raise DataError(
                f"{len(self.values)} embedding rows but labels of shape {self.labels.shape}"
            )

    @classmethod
    def capture(
        cls,
        values: Tensor | ArrayLike,
        tap: TapName,
        *,
        step: int,
        seed: int,
        split: Split = "eval",
        labels: ArrayLike | None = None,
    ) -> EmbeddingDump:
        """Copies `values` off the tape, so the dump is a snapshot."""
        data = values.data if isinstance(values, Tensor) else values
        return cls(
            values=np.array(data, dtype=np.float64),
            tap=tap,
            step=step,
            seed=seed,
            split=split,
            labels=None if labels is None else np.asarray(labels, dtype=np.int64),
        )

    @property
    def manifest(self) -> DumpManifest:
        return DumpManifest(
            tap=self.tap,
            step=self.step,
            seed=self.seed,
            split=self.split,
            rows=self.values.shape[0],
            dim=self.values.shape[1],
            has_labels=self.labels is not None,
        )


def dump_paths(stem: Path) -> tuple[Path, Path, Path]:
    """(values, labels, sidecar) paths for a dump stem."""
    return (
        stem.with_name(f"{stem.name}.sslt"),
        stem.with_name(f"{stem.name}.labels.sslt"),
        stem.with_name(f"{stem.name}.json"),
    )


def write_embeddings(stem: Path, dump: EmbeddingDump):
    values_path, labels_path, sidecar_path = dump_paths(stem)
    write_tensor(values_path, dump.values)
    if dump.labels is not None:
        write_tensor(labels_path, dump.labels.astype(np.float64))
    write_to_path(sidecar_path, dump.manifest.model_dump_json(indent=2))
    logger.debug(f"Dumped {dump.tap} embeddings {dump.values.shape} to {values_path}")


def _stem(path: Path) -> Path:
    name = path.name
    for suffix in (".labels.sslt", ".sslt", ".json"):
        if name.endswith(suffix):
            return path.with_name(name.removesuffix(suffix))
    return path


def read_embeddings(path: Path) -> EmbeddingDump:
    """Loads a dump from its stem or any of its three files."""
    values_path, labels_path, sidecar_path = dump_paths(_stem(path))
    if not sidecar_path.is_file():
        raise DataError(f"Missing embedding sidecar {sidecar_path}")
    manifest = DumpManifest.model_validate_json(sidecar_path.read_text("utf-8"))

    values = read_tensor(values_path)
    if values.shape != (manifest.rows, manifest.dim):
        raise DataError(
            f"{values_path}: shape {values.shape} disagrees with sidecar "
            f"({manifest.rows}, {manifest.dim})"
        )

    labels = None
    if manifest.has_labels:
        raw = read_tensor(labels_path)
        labels = raw.astype(np.int64)
        if not np.array_equal(labels, raw):
            raise DataError(f"{labels_path}: labels are not integers")

    return EmbeddingDump(
        values=values,
        tap=manifest.tap,
        step=manifest.step,
        seed=manifest.seed,
        split=manifest.split,
        labels=labels,
    )
