"""Frozen-encoder embeddings at every tap, and their on-disk dumps."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from sslforge.data import LabeledImages
from sslforge.eval import EmbeddingDump, write_embeddings
from sslforge.eval.dumps import Split
from sslforge.nets import EncoderSpec, TapName, encode
from sslforge.tensor import Array, Tensor

logger = logging.getLogger(__name__)

EMBEDDINGS_DIR = "embeddings"
CHUNK = 1024


def frozen(params: Mapping[str, Tensor | Array]) -> dict[str, Tensor]:
    """Untracked copies, so nothing below builds a tape."""
    return {
        name: Tensor(value.data if isinstance(value, Tensor) else value)
        for name, value in params.items()
    }


def embed_taps(
    spec: EncoderSpec,
    params: Mapping[str, Tensor | Array],
    images: Array,
    taps: Sequence[TapName],
) -> dict[TapName, Array]:
    """Embeddings of unaugmented images at each requested tap that the model has."""
    weights = frozen(params)
    chunks: dict[TapName, list[Array]] = {tap: [] for tap in taps}
    for start in range(0, len(images), CHUNK):
        batch = np.asarray(images[start : start + CHUNK], dtype=np.float64)
        out = encode(spec, weights, batch)
        for tap in taps:
            if (value := out.tap(tap)) is not None:
                chunks[tap].append(value.data)
    return {tap: np.concatenate(parts) for tap, parts in chunks.items() if parts}


def dump_taps(
    directory: Path,
    spec: EncoderSpec,
    params: Mapping[str, Tensor | Array],
    splits: Mapping[Split, LabeledImages],
    taps: Sequence[TapName],
    *,
    step: int,
    seed: int,
) -> dict[tuple[Split, TapName], EmbeddingDump]:
    """Writes `<split>_<tap>.sslt` (plus labels and sidecar) for every split and tap."""
    dumps: dict[tuple[Split, TapName], EmbeddingDump] = {}
    for split, dataset in splits.items():
        for tap, values in embed_taps(spec, params, dataset.images, taps).items():
            dump = EmbeddingDump.capture(
                values, tap, step=step, seed=seed, split=split, labels=dataset.labels
            )
            write_embeddings(directory / f"{split}_{tap}", dump)
            dumps[split, tap] = dump
    logger.debug(f"Dumped {len(dumps)} embedding sets to {directory}")
    return dumps
