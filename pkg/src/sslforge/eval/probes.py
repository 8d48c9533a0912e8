"""Supervised read-outs on frozen embeddings: offline linear and MLP probes, and the
online probe trained alongside pre-training on stop-gradient features."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Annotated, Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike
from pydantic import Field

from sslforge.core.base import FrozenForgeModel
from sslforge.errors import DimensionError, ParameterError
from sslforge.nets import MlpSpec, Params, init_mlp, mlp_forward
from sslforge.optim import OptimizerKind, OptimState, optimizer_step
from sslforge.tensor import Array, Tensor, backward, cross_entropy, stop_gradient
from sslforge.utils import TRACE

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


class ProbeConfig(FrozenForgeModel):
    epochs: Annotated[int, Field(ge=0)] = 100
    lr: Annotated[float, Field(gt=0)] = 0.05
    weight_decay: Annotated[float, Field(ge=0)] = 0.0
    optimizer: OptimizerKind = "adam"
    batch_size: Annotated[int, Field(ge=1)] | None = None
    """None trains full-batch."""
    hidden: Annotated[int, Field(ge=1)] = 256
    """Hidden width of the MLP probe."""
    standardize: bool = True
    """Standardize features with the training mean and std."""
    seed: int = 0


@dataclass(frozen=True)
class ProbeResult:
    curve: list[float]
    """Validation accuracy before training, then after every epoch."""

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1]

    @property
    def best_epoch(self) -> int:
        return int(np.argmax(self.curve))

    @property
    def best_accuracy(self) -> float:
        return self.curve[self.best_epoch]


Forward = Callable[[Params, Tensor], Tensor]


def _features(Z: Tensor | ArrayLike) -> Array:
    values = np.asarray(Z.data if isinstance(Z, Tensor) else Z, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError("probe features", values.shape)
    return values


def _labels(labels: ArrayLike, n: int) -> Array:
    values = np.asarray(labels, dtype=np.int64)
    if values.shape != (n,):
        raise DimensionError("probe labels", values.shape, (n,))
    return values


def accuracy(logits: Tensor | Array, labels: ArrayLike) -> float:
    """Argmax accuracy; equal logits resolve to the smallest class index."""
    values = logits.data if isinstance(logits, Tensor) else logits
    return float((np.argmax(values, axis=1) == np.asarray(labels)).mean())


def _grads_by_name(params: Mapping[str, Tensor], grads: Mapping[Tensor, Array]):
    return {name: grads[p] for name, p in params.items() if p in grads}


def _train(
    forward: Forward,
    params: Params,
    train: tuple[Array, Array],
    val: tuple[Array, Array],
    config: ProbeConfig,
    rng: np.random.Generator,
) -> ProbeResult:
    (X, y), (X_val, y_val) = train, val
    if config.standardize:
        mean, std = X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR)
        X, X_val = (X - mean) / std, (X_val - mean) / std

    state = OptimState.create(
        config.optimizer, params, lr=config.lr, weight_decay=config.weight_decay
    )
    batch_size = config.batch_size or len(X)
    curve = [accuracy(forward(params, Tensor(X_val)), y_val)]

    for epoch in range(config.epochs):
        order = rng.permutation(len(X)) if batch_size < len(X) else np.arange(len(X))
        for start in range(0, len(X), batch_size):
            batch = order[start : start + batch_size]
            loss = cross_entropy(forward(params, Tensor(X[batch])), y[batch])
            grads = backward(loss)
            params, state = optimizer_step(params, _grads_by_name(params, grads), state)
        curve.append(accuracy(forward(params, Tensor(X_val)), y_val))
        logger.log(TRACE, f"probe epoch {epoch + 1}: val accuracy {curve[-1]:.4f}")

    return ProbeResult(curve)


def _prepare(
    train_Z: Tensor | ArrayLike,
    train_labels: ArrayLike,
    val_Z: Tensor | ArrayLike,
    val_labels: ArrayLike,
    num_classes: int | None,
):
    X, X_val = _features(train_Z), _features(val_Z)
    if X.shape[1] != X_val.shape[1]:
        raise DimensionError("probe train/val features", X.shape, X_val.shape)
    y, y_val = _labels(train_labels, len(X)), _labels(val_labels, len(X_val))
    num_classes = num_classes or int(max(y.max(), y_val.max())) + 1
    if num_classes < 2:
        raise ParameterError("A probe needs at least 2 classes")
    return (X, y), (X_val, y_val), num_classes


def linear_probe(
    train_Z: Tensor | ArrayLike,
    train_labels: ArrayLike,
    val_Z: Tensor | ArrayLike,
    val_labels: ArrayLike,
    config: ProbeConfig | None = None,
    *,
    num_classes: int | None = None,
) -> ProbeResult:
    """Multinomial logistic regression from zero-initialized weights."""
    config = config or ProbeConfig()
    train, val, num_classes = _prepare(train_Z, train_labels, val_Z, val_labels, num_classes)
    dim = train[0].shape[1]

    params: Params = {
        "linear.weight": Tensor(np.zeros((dim, num_classes)), requires_grad=True),
        "linear.bias": Tensor(np.zeros(num_classes), requires_grad=True),
    }

    def forward(params: Params, X: Tensor) -> Tensor:
        return X @ params["linear.weight"] + params["linear.bias"]

    result = _train(forward, params, train, val, config, np.random.default_rng(config.seed))
    logger.info(
        f"Linear probe: final {result.final_accuracy:.4f}, "
        f"best {result.best_accuracy:.4f} at epoch {result.best_epoch}"
    )
    return result


def mlp_probe(
    train_Z: Tensor | ArrayLike,
    train_labels: ArrayLike,
    val_Z: Tensor | ArrayLike,
    val_labels: ArrayLike,
    config: ProbeConfig | None = None,
    *,
    num_classes: int | None = None,
) -> ProbeResult:
    """A two-layer ReLU head; the best epoch is reported alongside the last."""
    config = config or ProbeConfig()
    train, val, num_classes = _prepare(train_Z, train_labels, val_Z, val_labels, num_classes)
    spec = MlpSpec(widths=(train[0].shape[1], config.hidden, num_classes))

    rng = np.random.default_rng(config.seed)
    params = init_mlp(spec, rng, prefix="head.")

    def forward(params: Params, X: Tensor) -> Tensor:
        return mlp_forward(spec, params, X, prefix="head.")

    result = _train(forward, params, train, val, config, rng)
    logger.info(
        f"MLP probe: final {result.final_accuracy:.4f}, "
        f"best {result.best_accuracy:.4f} at epoch {result.best_epoch}"
    )
    return result


@dataclass
class OnlineProbe:
    """Linear classifier updated once per training step on detached features."""

    dim: int
    num_classes: int
    lr: float = 1e-3
    optimizer: OptimizerKind = "adam"
    window: int = 50
    params: Params = field(init=False)
    state: OptimState = field(init=False)
    recent: deque[float] = field(init=False)

    def __post_init__(self):
        self.params = {
            "online.weight": Tensor(np.zeros((self.dim, self.num_classes)), requires_grad=True),
            "online.bias": Tensor(np.zeros(self.num_classes), requires_grad=True),
        }
        self.state = OptimState.create(self.optimizer, self.params, lr=self.lr)
        self.recent = deque(maxlen=self.window)

    def logits(self, X: Tensor) -> Tensor:
        return X @ self.params["online.weight"] + self.params["online.bias"]

    def step(self, embeddings: Tensor | ArrayLike, labels: ArrayLike) -> float:
        """One optimizer step; returns the batch accuracy before the update.

        The features are cut from the tape first, so nothing upstream of
        `embeddings` receives gradient from the probe.
        """
        X = stop_gradient(embeddings) if isinstance(embeddings, Tensor) else Tensor(embeddings)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionError("online probe features", X.shape, (self.dim,))
        y = _labels(labels, X.shape[0])

        logits = self.logits(X)
        batch_accuracy = accuracy(logits, y)
        grads = backward(cross_entropy(logits, y))
        self.params, self.state = optimizer_step(
            self.params, _grads_by_name(self.params, grads), self.state
        )
        self.recent.append(batch_accuracy)
        return batch_accuracy

    @property
    def running_accuracy(self) -> float | None:
        """Mean batch accuracy over the last `window` steps."""
        if not self.recent:
            return None
        return float(np.mean(self.recent))

    def evaluate(self, Z: Tensor | ArrayLike, labels: ArrayLike) -> float:
        X = Tensor(_features(Z))
        return accuracy(self.logits(X), _labels(labels, X.shape[0]))
