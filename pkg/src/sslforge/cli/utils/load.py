import logging
from pathlib import Path

import numpy as np

from sslforge.errors import DataError
from sslforge.eval import EmbeddingDump, read_embeddings
from sslforge.harness import ExperimentConfig
from sslforge.tensor import Array, read_tensor
from sslforge.utils import setup_logging

from .args import get_default_config

logger = logging.getLogger(__name__)


def load_config(
    config_file: Path | None,
    verbosity: int,
    *,
    quiet: bool = False,
    seed: int | None = None,
    epochs: int | None = None,
    output_dir: Path | None = None,
) -> ExperimentConfig:
    setup_logging(verbosity, quiet=quiet)

    config_file = config_file or get_default_config()
    config = ExperimentConfig.load(config_file, seed=seed)
    if epochs is not None:
        config = config.with_override("run.epochs", epochs)
    if output_dir is not None:
        config = config.with_override("run.output_dir", str(output_dir))

    logger.debug(f"Loaded config {config_file} (seed {config.seed})")
    return config


def read_labels(path: Path) -> Array:
    values = read_tensor(path)
    if values.ndim != 1 or not np.array_equal(values, np.round(values)):
        raise DataError(f"{path} does not hold a vector of integer labels")
    return values.astype(np.int64)


def load_labeled(embeddings: Path, labels: Path | None) -> tuple[EmbeddingDump, Array]:
    """An embedding dump and its labels, from `labels` or else the dump's own."""
    dump = read_embeddings(embeddings)
    if labels is not None:
        values = read_labels(labels)
    elif dump.labels is not None:
        values = dump.labels
    else:
        raise DataError(f"{embeddings} has no labels; pass a labels file")

    if len(values) != len(dump.values):
        raise DataError(
            f"{len(dump.values)} embedding rows but {len(values)} labels in {labels}"
        )
    return dump, values


def holdout(
    values: Array,
    labels: Array,
    val_fraction: float,
) -> tuple[tuple[Array, Array], tuple[Array, Array]]:
    """The last `val_fraction` of the rows as the query set, like dataset splits."""
    n = len(values)
    cut = n - max(1, int(round(n * val_fraction)))
    if cut < 1:
        raise DataError(f"Too few rows ({n}) to hold out a query set")
    return (values[:cut], labels[:cut]), (values[cut:], labels[cut:])
