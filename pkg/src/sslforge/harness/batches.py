"""Training batches: per-image augmentation substreams and bounded prefetch."""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, TypeVar

import numpy as np

from sslforge.data import (
    AugPolicy,
    LabeledImages,
    MultiCropSpec,
    derive_seed,
    image_seed,
    make_views,
    mask_patches,
    substream,
)
from sslforge.errors import ParameterError
from sslforge.tensor import Array
from sslforge.utils import TRACE

logger = logging.getLogger(__name__)

_T = TypeVar("_T")
_R = TypeVar("_R")

_PERMUTATION_STREAM = 0


@dataclass(frozen=True)
class BatchPlan:
    """Everything a batch depends on, fixed before any view is drawn."""

    epoch: int
    index: int
    rows: Array
    """Dataset row of every sample in the batch."""
    seed: int


@dataclass(frozen=True)
class ViewBatch:
    plan: BatchPlan
    labels: Array
    views: list[Array]
    """One (B, h, w, C) array per view, global views first."""
    masked: Array | None = None
    """(B, H, W, C) inputs with masked patches zeroed."""
    pixel_mask: Array | None = None
    """(B, H·W·C), True on masked pixels."""

    @property
    def global_views(self) -> list[Array]:
        return self.views[:2]


def epoch_plans(n_train: int, batch_size: int, epoch: int, seed: int) -> list[BatchPlan]:
    """Shuffled full batches for one epoch; the remainder is dropped."""
    if batch_size > n_train:
        raise ParameterError(
            f"Effective batch {batch_size} exceeds the {n_train} training samples"
        )
    order = substream(seed, _PERMUTATION_STREAM, epoch).permutation(n_train)
    count = n_train // batch_size
    return [
        BatchPlan(
            epoch=epoch,
            index=b,
            rows=order[b * batch_size : (b + 1) * batch_size],
            seed=derive_seed(seed, epoch, b),
        )
        for b in range(count)
    ]


def build_views(
    dataset: LabeledImages,
    plan: BatchPlan,
    policy: AugPolicy,
    multicrop: MultiCropSpec,
    *,
    run_seed: int,
) -> ViewBatch:
    per_image = []
    for row in plan.rows:
        seed = image_seed(run_seed, int(row), plan.epoch)
        rng = np.random.default_rng(seed)
        per_image.append(
            make_views(
                dataset.image(int(row)),
                policy,
                multicrop.n_local,
                rng,
                multicrop=multicrop,
                source_index=int(row),
                seed=seed,
            ).views
        )
    views = [np.stack(column) for column in zip(*per_image)]
    logger.log(TRACE, f"Built {len(views)} views for batch {plan.epoch}.{plan.index}")
    return ViewBatch(plan, dataset.labels[plan.rows], views)


def build_masked(
    dataset: LabeledImages,
    plan: BatchPlan,
    patch: int,
    ratio: float,
    *,
    run_seed: int,
) -> ViewBatch:
    """Unaugmented images with a fresh patch mask per image and epoch."""
    images, masks = [], []
    for row in plan.rows:
        rng = np.random.default_rng(image_seed(run_seed, int(row), plan.epoch))
        img = dataset.image(int(row))
        masked = mask_patches(img, patch, ratio, rng)
        images.append(masked.image)
        pixel_mask = np.broadcast_to(masked.pixel_mask[..., None], img.shape)
        masks.append(pixel_mask.reshape(-1))
    originals = dataset.images[plan.rows].astype(np.float64)
    return ViewBatch(
        plan,
        dataset.labels[plan.rows],
        [originals],
        masked=np.stack(images),
        pixel_mask=np.stack(masks),
    )


def prefetched(
    build: Callable[[_T], _R],
    jobs: Iterable[_T],
    depth: int = 2,
) -> Iterator[_R]:
    """Yields `build(job)` in order, with up to `depth` jobs running ahead on one
    worker thread. Jobs carry their own seeds, so results do not depend on `depth`."""
    if depth <= 0:
        yield from map(build, jobs)
        return

    with ThreadPoolExecutor(max_workers=1, thread_name_prefix="sslforge-prefetch") as pool:
        pending: deque[Future[_R]] = deque()
        for job in jobs:
            pending.append(pool.submit(build, job))
            if len(pending) > depth:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
