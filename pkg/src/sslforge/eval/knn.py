from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from sslforge.errors import DimensionError, ParameterError
from sslforge.tensor import Array, Tensor, l2_normalize_rows

logger = logging.getLogger(__name__)

KnnMode = Literal["majority", "weighted"]

DEFAULT_K = 20
DEFAULT_TEMPERATURE = 0.07


@dataclass(frozen=True)
class KnnResult:
    predictions: Array
    accuracy: float | None
    """None when no query labels were given."""


def _normalized(Z: Tensor | ArrayLike) -> Array:
    tensor = Z if isinstance(Z, Tensor) else Tensor(Z)
    if tensor.ndim != 2:
        raise DimensionError("knn embeddings", tensor.shape)
    return l2_normalize_rows(tensor).data


def knn_classify(
    train_Z: Tensor | ArrayLike,
    train_labels: ArrayLike,
    query_Z: Tensor | ArrayLike,
    query_labels: ArrayLike | None = None,
    *,
    k: int = DEFAULT_K,
    temperature: float = DEFAULT_TEMPERATURE,
    mode: KnnMode = "weighted",
    num_classes: int | None = None,
) -> KnnResult:
    """Votes among the k most cosine-similar training rows.

    Weighted votes count e^{sim/T} per neighbour. Ties between classes go to the
    smallest class index; ties in similarity go to the earlier training row.
    """
    train = _normalized(train_Z)
    query = _normalized(query_Z)
    labels = np.asarray(train_labels, dtype=np.int64)
    if train.shape[1] != query.shape[1] or labels.shape != (len(train),):
        raise DimensionError("knn_classify", train.shape, query.shape, labels.shape)
    if not 1 <= k <= len(train):
        raise ParameterError(f"k must be in [1, {len(train)}], got {k}")
    if temperature <= 0:
        raise ParameterError(f"Temperature must be positive, got {temperature}")

    num_classes = num_classes or int(labels.max()) + 1
    similarity = query @ train.T
    neighbours = np.argsort(-similarity, axis=1, kind="stable")[:, :k]
    neighbour_sim = np.take_along_axis(similarity, neighbours, axis=1)

    match mode:
        case "majority":
            weights = np.ones_like(neighbour_sim)
        case "weighted":
            # shifting by the row maximum leaves the vote unchanged
            weights = np.exp((neighbour_sim - neighbour_sim[:, :1]) / temperature)

    votes = np.zeros((len(query), num_classes))
    np.add.at(votes, (np.arange(len(query))[:, None], labels[neighbours]), weights)
    predictions = np.argmax(votes, axis=1)

    accuracy = None
    if query_labels is not None:
        truth = np.asarray(query_labels, dtype=np.int64)
        if truth.shape != predictions.shape:
            raise DimensionError("knn query labels", truth.shape, predictions.shape)
        accuracy = float((predictions == truth).mean())
        logger.info(f"kNN ({mode}, k={k}, T={temperature}): accuracy {accuracy:.4f}")

    return KnnResult(predictions, accuracy)
