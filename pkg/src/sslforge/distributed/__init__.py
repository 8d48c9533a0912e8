"""Single-process simulation of data-parallel SSL training."""

__all__ = [
    "ReduceOp",
    "ShardedBatch",
    "VirtualWorld",
    "all_reduce",
    "shard_batch",
    "sync_batch_stats",
]

from .virtual import (
    ReduceOp,
    ShardedBatch,
    VirtualWorld,
    all_reduce,
    shard_batch,
    sync_batch_stats,
)
