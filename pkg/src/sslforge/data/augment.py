"""Positive-view generation: the ordered augmentation pipeline and multi-crop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Literal, Union

import numpy as np
from more_itertools import ilen
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image as PILImage
from pydantic import Field, model_validator

from sslforge.core.base import ForgeModel
from sslforge.errors import ParameterError
from sslforge.utils.iterators import listify
from sslforge.utils.logging import TRACE

from .synthetic import Image

logger = logging.getLogger(__name__)

Probability = Annotated[float, Field(ge=0, le=1)]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_Box = tuple[float, float, float, float]


class _AugOp(ForgeModel):
    p: Probability


class CropOp(_AugOp):
    """Random resized crop: area fraction from `scale`, aspect ratio log-uniform."""

    op: Literal["crop"] = "crop"
    p: Probability = 1.0
    scale: tuple[float, float] = (0.4, 1.0)
    ratio: tuple[float, float] = (3 / 4, 4 / 3)

    @model_validator(mode="after")
    def _check_ranges(self):
        lo, hi = self.scale
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"crop scale range must lie in (0, 1], got {self.scale}")
        if not 0 < self.ratio[0] <= self.ratio[1]:
            raise ValueError(f"invalid aspect ratio range {self.ratio}")
        return self


class FlipOp(_AugOp):
    op: Literal["flip"] = "flip"
    p: Probability = 0.5


class ColorJitterOp(_AugOp):
    """Multiplicative brightness and contrast, then channel-mix saturation."""

    op: Literal["color_jitter"] = "color_jitter"
    p: Probability = 0.8
    brightness: Annotated[float, Field(ge=0, le=1)] = 0.4
    contrast: Annotated[float, Field(ge=0, le=1)] = 0.4
    saturation: Annotated[float, Field(ge=0, le=1)] = 0.4


class GrayscaleOp(_AugOp):
    op: Literal["grayscale"] = "grayscale"
    p: Probability = 0.2


class BlurOp(_AugOp):
    op: Literal["blur"] = "blur"
    p: Probability = 0.5
    sigma: tuple[float, float] = (0.1, 2.0)

    @model_validator(mode="after")
    def _check_sigma(self):
        if not 0 < self.sigma[0] <= self.sigma[1]:
            raise ValueError(f"invalid blur sigma range {self.sigma}")
        return self


AugOp = Annotated[
    Union[CropOp, FlipOp, ColorJitterOp, GrayscaleOp, BlurOp],
    Field(discriminator="op"),
]


def _default_ops() -> list[AugOp]:
    return [CropOp(), FlipOp(), ColorJitterOp(), GrayscaleOp(), BlurOp()]


class AugPolicy(ForgeModel):
    size: Annotated[int, Field(ge=1)] = 32
    """Target side length of every output view."""
    ops: list[AugOp] = Field(default_factory=_default_ops)

    def with_crop(self, scale: tuple[float, float], size: int) -> AugPolicy:
        """Copy with every crop op's scale range replaced and a new target size."""
        ops = [
            op.model_copy(update={"scale": CropOp(scale=scale).scale})
            if isinstance(op, CropOp)
            else op
            for op in self.ops
        ]
        return self.model_copy(update={"ops": ops, "size": size})


class MultiCropSpec(ForgeModel):
    n_local: Annotated[int, Field(ge=0)] = 0
    global_scale: tuple[float, float] = (0.4, 1.0)
    local_scale: tuple[float, float] = (0.05, 0.4)
    local_size: Annotated[int, Field(ge=1)] = 16


@dataclass(frozen=True)
class ViewSet:
    global_views: tuple[Image, Image]
    local_views: tuple[Image, ...]
    source_index: int
    seed: int | None

    @property
    def views(self) -> list[Image]:
        """Global views first, then local views; pair indices refer to this order."""
        return [*self.global_views, *self.local_views]

    @property
    def n_views(self) -> int:
        return 2 + len(self.local_views)


# pipeline


def apply_augmentation(img: Image, policy: AugPolicy, rng: np.random.Generator) -> Image:
    out = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    for op in policy.ops:
        # the gate is always drawn so later ops see the same stream either way
        if rng.random() >= op.p:
            continue
        match op:
            case CropOp():
                box = _sample_crop_box(out.shape[0], out.shape[1], op, rng)
                out = resize(out, policy.size, box)
            case FlipOp():
                out = out[:, ::-1]
            case ColorJitterOp():
                out = _color_jitter(out, op, rng)
            case GrayscaleOp():
                out = grayscale(out)
            case BlurOp():
                out = gaussian_blur(out, rng.uniform(*op.sigma))
        out = np.clip(out, 0.0, 1.0)

    if out.shape[:2] != (policy.size, policy.size):
        out = np.clip(resize(out, policy.size), 0.0, 1.0)
    return np.ascontiguousarray(out)


def make_views(
    img: Image,
    policy: AugPolicy,
    n_local: int,
    rng: np.random.Generator,
    *,
    multicrop: MultiCropSpec | None = None,
    source_index: int = 0,
    seed: int | None = None,
) -> ViewSet:
    if n_local < 0:
        raise ParameterError(f"n_local must be non-negative, got {n_local}")
    multicrop = multicrop or MultiCropSpec()

    global_policy = policy.with_crop(multicrop.global_scale, policy.size)
    globals_ = (
        apply_augmentation(img, global_policy, rng),
        apply_augmentation(img, global_policy, rng),
    )

    locals_: tuple[Image, ...] = ()
    if n_local:
        if multicrop.local_size >= policy.size:
            raise ParameterError(
                f"Local crop size {multicrop.local_size} must be smaller than the "
                f"global size {policy.size}"
            )
        local_policy = policy.with_crop(multicrop.local_scale, multicrop.local_size)
        locals_ = tuple(
            apply_augmentation(img, local_policy, rng) for _ in range(n_local)
        )

    return ViewSet(globals_, locals_, source_index, seed)


@listify
def multicrop_pairs(n_local: int):
    """Every global view is an anchor against every other view, local or global."""
    if n_local < 0:
        raise ParameterError(f"n_local must be non-negative, got {n_local}")
    for anchor in (0, 1):
        for other in range(2 + n_local):
            if other != anchor:
                yield (anchor, other)


def pair_count(n_local: int) -> int:
    return ilen(multicrop_pairs(n_local))


# ops


def resize(img: Image, size: int, box: _Box | None = None) -> Image:
    """Bilinear resample of `box` (left, upper, right, lower) to size×size."""
    channels = [
        np.asarray(
            PILImage.fromarray(np.ascontiguousarray(img[..., c], dtype=np.float32), "F")
            .resize((size, size), PILImage.Resampling.BILINEAR, box=box),
            dtype=np.float64,
        )
        for c in range(img.shape[2])
    ]
    return np.stack(channels, axis=2)


def grayscale(img: Image) -> Image:
    luma = img @ LUMA_WEIGHTS
    return np.repeat(luma[..., None], img.shape[2], axis=2)


def gaussian_blur(img: Image, sigma: float) -> Image:
    """Separable Gaussian truncated at 3σ, reflect-padded at the borders."""
    radius = min(math.ceil(3 * sigma), img.shape[0] - 1, img.shape[1] - 1)
    if radius < 1:
        return img
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-(offsets**2) / (2 * sigma**2))
    kernel /= kernel.sum()

    out = img
    for axis in (0, 1):
        pad = [(0, 0)] * out.ndim
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, mode="reflect")
        out = sliding_window_view(padded, 2 * radius + 1, axis=axis) @ kernel
    return out


def _sample_crop_box(
    height: int,
    width: int,
    op: CropOp,
    rng: np.random.Generator,
) -> _Box:
    area = height * width
    log_ratio = np.log(op.ratio)
    for _ in range(10):
        target = area * rng.uniform(*op.scale)
        aspect = math.exp(rng.uniform(*log_ratio))
        w = round(math.sqrt(target * aspect))
        h = round(math.sqrt(target / aspect))
        if 0 < w <= width and 0 < h <= height:
            top = int(rng.integers(0, height - h + 1))
            left = int(rng.integers(0, width - w + 1))
            return (left, top, left + w, top + h)

    logger.log(TRACE, f"Crop sampling fell back to the full {height}x{width} image")
    return (0, 0, width, height)


def _color_jitter(img: Image, op: ColorJitterOp, rng: np.random.Generator) -> Image:
    brightness = rng.uniform(1 - op.brightness, 1 + op.brightness)
    contrast = rng.uniform(1 - op.contrast, 1 + op.contrast)
    saturation = rng.uniform(1 - op.saturation, 1 + op.saturation)

    out = np.clip(img * brightness, 0.0, 1.0)
    mean = (out @ LUMA_WEIGHTS).mean()
    out = np.clip((out - mean) * contrast + mean, 0.0, 1.0)
    gray = grayscale(out)
    return (out - gray) * saturation + gray
