"""Procedural stand-in for a natural-image dataset: one coloured shape per image on a
striped, noisy background. The class is the shape; hue, position, scale and the
background are nuisance factors that augmentations are supposed to wash out."""

from __future__ import annotations

import colorsys
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sslforge.errors import DataError, ParameterError

logger = logging.getLogger(__name__)

Image = NDArray[np.float64]
"""(H, W, 3) pixels in [0, 1]."""

_Coords = NDArray[np.float64]
ShapeMask = Callable[[_Coords, _Coords], NDArray[np.bool_]]

# u, v are pixel coordinates relative to the shape centre, in units of its radius
SHAPES: dict[str, ShapeMask] = {
    "disk": lambda u, v: u**2 + v**2 <= 1,
    "square_frame": lambda u, v: (np.maximum(abs(u), abs(v)) <= 1)
    & (np.maximum(abs(u), abs(v)) >= 0.6),
    "triangle": lambda u, v: (abs(v) <= 1) & (abs(u) <= (v + 1) / 2),
    "cross": lambda u, v: ((abs(u) <= 0.3) & (abs(v) <= 1))
    | ((abs(v) <= 0.3) & (abs(u) <= 1)),
    "ring": lambda u, v: (u**2 + v**2 <= 1) & (u**2 + v**2 >= 0.55**2),
    "diamond": lambda u, v: abs(u) + abs(v) <= 1,
    "bar": lambda u, v: (abs(u) <= 1) & (abs(v) <= 0.35),
    "x_mark": lambda u, v: ((abs(u - v) <= 0.4) | (abs(u + v) <= 0.4))
    & (np.maximum(abs(u), abs(v)) <= 1),
}

SHAPE_NAMES = tuple(SHAPES)


@dataclass(frozen=True)
class LabeledImages:
    images: NDArray[np.float32]
    """(n, H, W, C), row-major."""
    labels: NDArray[np.int64]

    def __post_init__(self):
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise DataError(
                f"Expected (n, H, W, C) images with n labels, got {self.images.shape} "
                f"and {self.labels.shape}"
            )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return self.images.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    def image(self, index: int) -> Image:
        return self.images[index].astype(np.float64)

    def subset(self, indices: ArrayLike) -> LabeledImages:
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledImages(self.images[indices], self.labels[indices])

    def split(self, val_fraction: float) -> tuple[LabeledImages, LabeledImages]:
        """Deterministic split: the last `val_fraction` of the rows is validation."""
        if not 0 < val_fraction < 1:
            raise ParameterError(f"val_fraction must be in (0, 1), got {val_fraction}")
        cut = len(self) - max(1, int(round(len(self) * val_fraction)))
        if cut < 1:
            raise ParameterError(f"Too few samples ({len(self)}) to split")
        return self.subset(np.arange(cut)), self.subset(np.arange(cut, len(self)))


def gen_synthetic_dataset(n: int, classes: int, size: int, seed: int) -> LabeledImages:
    if not 2 <= classes <= len(SHAPES):
        raise ParameterError(f"classes must be in [2, {len(SHAPES)}], got {classes}")
    if size < 16:
        raise ParameterError(f"size must be at least 16, got {size}")
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes).astype(np.int64)

    ys, xs = (np.mgrid[0:size, 0:size] + 0.5) / size
    images = np.empty((n, size, size, 3), dtype=np.float32)
    for i, label in enumerate(labels):
        images[i] = _render(rng, SHAPE_NAMES[label], xs, ys)

    logger.debug(f"Generated {n} images ({classes} classes, {size}px, seed {seed})")
    return LabeledImages(images, labels)


def _render(rng: np.random.Generator, shape: str, xs: _Coords, ys: _Coords) -> Image:
    # background: grey level, faint oriented stripes, pixel noise
    level = rng.uniform(0.1, 0.3)
    amplitude = rng.uniform(0.02, 0.06)
    frequency = rng.uniform(2.0, 6.0)
    angle = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    stripes = np.sin(
        2 * np.pi * frequency * (xs * np.cos(angle) + ys * np.sin(angle)) + phase
    )
    background = level + amplitude * stripes
    image = np.repeat(background[..., None], 3, axis=2)
    image += rng.normal(0.0, 0.015, size=image.shape)

    radius = rng.uniform(0.18, 0.32)
    cx, cy = rng.uniform(radius, 1 - radius, size=2)
    mask = SHAPES[shape]((xs - cx) / radius, (ys - cy) / radius)
    color = colorsys.hsv_to_rgb(rng.uniform(0, 1), 0.85, 1.0)
    image[mask] = color

    return np.clip(image, 0.0, 1.0)
