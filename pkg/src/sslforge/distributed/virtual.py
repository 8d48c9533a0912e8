"""Data-parallel training semantics simulated inside one process.

Ranks run one after another in rank order. Each rank owns a replica of the
parameters and a contiguous shard of every input; embeddings are all-gathered so
batch-coupled losses see the full effective batch. The gradient path mirrors the
usual recipe: the gather's backward all-reduces (sums) the gradient of the full
gathered tensor and hands each rank its own rows, and the data-parallel wrapper
then divides the summed parameter gradients by the world size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike

from sslforge.errors import DimensionError, ParameterError
from sslforge.nets import Params
from sslforge.tensor import Array, Tensor, backward, concat
from sslforge.utils import TRACE

logger = logging.getLogger(__name__)

ReduceOp = Literal["sum", "mean"]

Forward = Callable[[Params, Tensor], Tensor]
"""Per-rank model: (replica parameters, input shard) -> embeddings of the shard."""

BatchLoss = Callable[..., Tensor]
"""Scalar loss over one gathered embedding matrix per input view."""


@dataclass(frozen=True)
class ShardedBatch:
    shards: tuple[Array, ...]

    @property
    def world_size(self) -> int:
        return len(self.shards)

    @property
    def shard_size(self) -> int:
        return len(self.shards[0])

    @property
    def effective_batch(self) -> int:
        return self.world_size * self.shard_size

    def rows(self, rank: int) -> slice:
        return slice(rank * self.shard_size, (rank + 1) * self.shard_size)

    def concat(self) -> Array:
        return np.concatenate(self.shards)


def shard_batch(batch: ArrayLike, world_size: int) -> ShardedBatch:
    """Contiguous, rank-ordered split of the leading axis."""
    values = np.asarray(batch)
    if world_size < 1:
        raise ParameterError(f"World size must be positive, got {world_size}")
    if values.ndim < 1 or len(values) % world_size:
        raise ParameterError(
            f"A batch of {len(values) if values.ndim else 0} rows does not split "
            f"over {world_size} ranks"
        )
    return ShardedBatch(tuple(np.split(values, world_size)))


def _equal_shapes(op: str, arrays: Sequence[Array]):
    shapes = [a.shape for a in arrays]
    if not shapes or any(shape != shapes[0] for shape in shapes):
        raise DimensionError(op, *shapes)


def all_reduce(arrays: Sequence[ArrayLike], op: ReduceOp = "sum") -> Array:
    """Elementwise reduction over ranks, summed in rank order."""
    values = [np.asarray(a, dtype=np.float64) for a in arrays]
    _equal_shapes("all_reduce", values)
    total = values[0].copy()
    for value in values[1:]:
        total += value
    match op:
        case "sum":
            return total
        case "mean":
            return total / len(values)


def sync_batch_stats(shards: Sequence[Tensor | ArrayLike]) -> tuple[Array, Array]:
    """Per-column mean and biased variance over the union of all shards."""
    values = [
        np.asarray(s.data if isinstance(s, Tensor) else s, dtype=np.float64) for s in shards
    ]
    _equal_shapes("sync_batch_stats", values)
    count = sum(len(v) for v in values)

    mean = all_reduce([v.sum(axis=0) for v in values]) / count
    var = all_reduce([((v - mean) ** 2).sum(axis=0) for v in values]) / count
    return mean, var


@dataclass(frozen=True)
class VirtualWorld:
    world_size: int

    def __post_init__(self):
        if self.world_size < 1:
            raise ParameterError(f"World size must be positive, got {self.world_size}")

    def shard(self, batch: ArrayLike) -> ShardedBatch:
        return shard_batch(batch, self.world_size)

    def replicate(self, params: Mapping[str, Tensor]) -> list[Params]:
        """One independent set of leaf tensors per rank, all equal to `params`."""
        return [
            {name: Tensor(p.data, requires_grad=True, name=name) for name, p in params.items()}
            for _ in range(self.world_size)
        ]

    def all_reduce(self, arrays: Sequence[ArrayLike], op: ReduceOp = "sum") -> Array:
        if len(arrays) != self.world_size:
            raise DimensionError("all_reduce ranks", (len(arrays),), (self.world_size,))
        return all_reduce(arrays, op)

    def gather_with_grad(self, shards: Sequence[Tensor]) -> Tensor:
        """Forward of the all-gather as one rank sees it: the rank-ordered
        concatenation, with every slice on the tape."""
        if len(shards) != self.world_size:
            raise DimensionError("gather_with_grad ranks", (len(shards),), (self.world_size,))
        _equal_shapes("gather_with_grad", [s.data for s in shards])
        return concat(list(shards))

    def gather_backward(self, rank_grads: Sequence[ArrayLike]) -> list[Array]:
        """Backward of the all-gather: sum every rank's gradient of the full
        gathered tensor, then give each rank the rows it contributed."""
        reduced = self.all_reduce(rank_grads, "sum")
        return list(self.shard(reduced).shards)

    def sync_batch_stats(self, shards: Sequence[Tensor | ArrayLike]) -> tuple[Array, Array]:
        if len(shards) != self.world_size:
            raise DimensionError("sync_batch_stats ranks", (len(shards),), (self.world_size,))
        return sync_batch_stats(shards)

    def average_gradients(self, replica_grads: Sequence[Mapping[str, Array]]) -> dict[str, Array]:
        """Data-parallel gradient sync: sum over ranks, divide by the world size."""
        names = list(replica_grads[0])
        return {
            name: self.all_reduce([grads[name] for grads in replica_grads], "mean")
            for name in names
        }

    def value_and_grad(
        self,
        forward: Forward,
        loss: BatchLoss,
        params: Mapping[str, Tensor],
        inputs: Sequence[ArrayLike],
    ) -> tuple[float, dict[str, Array]]:
        """Loss and parameter gradients of a batch-coupled loss computed on the
        all-gathered embeddings of every input view.

        Every rank evaluates the loss on its own copy of the gathered embeddings;
        the result equals the single-process computation on the whole batch.
        """
        replicas = self.replicate(params)
        sharded = [self.shard(x) for x in inputs]

        outputs = [
            [forward(replicas[rank], Tensor(view.shards[rank])) for view in sharded]
            for rank in range(self.world_size)
        ]
        gathered = [
            np.concatenate([outputs[rank][v].data for rank in range(self.world_size)])
            for v in range(len(sharded))
        ]

        value = 0.0
        per_rank_view_grads: list[list[Array]] = []
        for rank in range(self.world_size):
            leaves = [Tensor(g, requires_grad=True) for g in gathered]
            rank_loss = loss(*leaves)
            grads = backward(rank_loss)
            per_rank_view_grads.append([grads.get(leaf, np.zeros(leaf.shape)) for leaf in leaves])
            value = rank_loss.item()

        slices = [
            self.gather_backward([per_rank_view_grads[rank][v] for rank in range(self.world_size)])
            for v in range(len(sharded))
        ]

        replica_grads: list[dict[str, Array]] = []
        for rank, replica in enumerate(replicas):
            # vector-Jacobian product of this rank's forward with its gradient rows
            seed = sum(
                ((outputs[rank][v] * slices[v][rank]).sum() for v in range(len(sharded))),
                start=Tensor(0.0),
            )
            grads = backward(seed)
            replica_grads.append(
                {name: grads.get(p, np.zeros(p.shape)) for name, p in replica.items()}
            )

        logger.log(
            TRACE,
            f"value_and_grad over {self.world_size} ranks, "
            f"effective batch {sharded[0].effective_batch}",
        )
        return value, self.average_gradients(replica_grads)

    def local_value_and_grad(
        self,
        forward: Forward,
        loss: BatchLoss,
        params: Mapping[str, Tensor],
        inputs: Sequence[ArrayLike],
    ) -> tuple[float, dict[str, Array]]:
        """Per-sample losses need no gather: each rank averages over its own shard
        and the synced gradient is the mean over ranks."""
        replicas = self.replicate(params)
        sharded = [self.shard(x) for x in inputs]

        values: list[float] = []
        replica_grads: list[dict[str, Array]] = []
        for rank, replica in enumerate(replicas):
            outputs = [forward(replica, Tensor(view.shards[rank])) for view in sharded]
            rank_loss = loss(*outputs)
            grads = backward(rank_loss)
            values.append(rank_loss.item())
            replica_grads.append(
                {name: grads.get(p, np.zeros(p.shape)) for name, p in replica.items()}
            )

        return float(self.all_reduce(values, "mean")), self.average_gradients(replica_grads)
