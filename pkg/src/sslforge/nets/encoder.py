"""Encoder trunks and heads, with every layer of interest exposed as a tap."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Annotated, Literal, Mapping

import numpy as np
from numpy.typing import ArrayLike
from pydantic import Field, model_validator

from sslforge.core.base import FrozenForgeModel
from sslforge.errors import SpecError
from sslforge.tensor import Tensor, conv2d, global_avg_pool, relu

from .mlp import MlpSpec, Params, glorot_uniform, init_mlp, mlp_forward

logger = logging.getLogger(__name__)

TapName = Literal["backbone", "projector", "predictor"]
TAP_NAMES: tuple[TapName, ...] = ("backbone", "projector", "predictor")

_Width = Annotated[int, Field(gt=0)]


class TrunkSpec(FrozenForgeModel):
    kind: Literal["conv", "mlp"] = "conv"
    channels: tuple[_Width, ...] = (16, 32, 64)
    """Output channels of each 3×3 stride-2 conv block."""
    hidden: tuple[_Width, ...] = (256,)
    """Hidden widths of the mlp trunk."""
    width: _Width = 64
    """Backbone width of the mlp trunk."""
    image_size: _Width = 32
    in_channels: _Width = 3

    @model_validator(mode="after")
    def _check_blocks(self):
        if self.kind == "conv" and not 1 <= len(self.channels) <= 4:
            raise ValueError(f"conv trunk needs 1 to 4 blocks, got {len(self.channels)}")
        return self

    @property
    def backbone_dim(self) -> int:
        return self.channels[-1] if self.kind == "conv" else self.width

    @property
    def input_dim(self) -> int:
        return self.image_size**2 * self.in_channels

    @property
    def mlp(self) -> MlpSpec:
        return MlpSpec(widths=(self.input_dim, *self.hidden, self.width))


class EncoderSpec(FrozenForgeModel):
    trunk: TrunkSpec = TrunkSpec()
    projector: tuple[_Width, ...] = (128, 64)
    """Widths of the projector layers after the backbone; empty for no projector."""
    projector_batch_norm: bool = False
    predictor: tuple[_Width, ...] | None = (64, 64)
    pixel_head: bool = False
    """Linear decoder from the backbone back to pixels."""

    @property
    def projector_spec(self) -> MlpSpec | None:
        if not self.projector:
            return None
        flags = None
        if self.projector_batch_norm:
            flags = tuple(i < len(self.projector) - 1 for i in range(len(self.projector)))
        return MlpSpec(widths=(self.trunk.backbone_dim, *self.projector), batch_norm=flags)

    @property
    def projector_dim(self) -> int:
        return self.projector[-1] if self.projector else self.trunk.backbone_dim

    @property
    def predictor_spec(self) -> MlpSpec | None:
        if not self.predictor:
            return None
        return MlpSpec(widths=(self.projector_dim, *self.predictor))

    def tap_dim(self, tap: TapName) -> int | None:
        match tap:
            case "backbone":
                return self.trunk.backbone_dim
            case "projector":
                return self.projector_dim
            case "predictor":
                return self.predictor[-1] if self.predictor else None


@dataclass(frozen=True)
class Taps:
    backbone: Tensor
    projector: Tensor
    predictor: Tensor | None = None
    pixels: Tensor | None = None
    """(n, H·W·C) reconstruction from the pixel head."""

    def tap(self, name: TapName) -> Tensor | None:
        return getattr(self, name)


def init_encoder(spec: EncoderSpec, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    trunk = spec.trunk
    params: Params = {}

    match trunk.kind:
        case "conv":
            in_ch = trunk.in_channels
            for i, out_ch in enumerate(trunk.channels):
                weight = glorot_uniform(rng, (out_ch, in_ch, 3, 3), in_ch * 9, out_ch * 9)
                params[f"trunk.conv{i}.weight"] = Tensor(weight, requires_grad=True)
                params[f"trunk.conv{i}.bias"] = Tensor(np.zeros(out_ch), requires_grad=True)
                in_ch = out_ch
        case "mlp":
            params |= init_mlp(trunk.mlp, rng, "trunk.")

    if (projector := spec.projector_spec) is not None:
        params |= init_mlp(projector, rng, "projector.")
    if (predictor := spec.predictor_spec) is not None:
        params |= init_mlp(predictor, rng, "predictor.")
    if spec.pixel_head:
        params |= init_mlp(
            MlpSpec(widths=(trunk.backbone_dim, trunk.input_dim)), rng, "pixel_head."
        )

    logger.debug(
        f"Initialized {len(params)} tensors "
        f"({sum(p.size for p in params.values())} values, seed {seed})"
    )
    return params


def _as_batch(spec: EncoderSpec, images: ArrayLike | Tensor) -> Tensor:
    batch = images if isinstance(images, Tensor) else Tensor(images)
    trunk = spec.trunk
    if batch.ndim != 4 or batch.shape[3] != trunk.in_channels:
        raise SpecError(
            f"Expected (n, H, W, {trunk.in_channels}) images, got {batch.shape}"
        )
    # the conv trunk pools globally, so smaller local crops are fine there
    exact = trunk.kind == "mlp" or spec.pixel_head
    size = trunk.image_size
    if exact and batch.shape[1:3] != (size, size):
        raise SpecError(f"Expected {size}x{size} images, got {batch.shape[1:3]}")
    return batch


def encode_backbone(
    spec: EncoderSpec,
    params: Mapping[str, Tensor],
    images: ArrayLike | Tensor,
) -> Tensor:
    batch = _as_batch(spec, images)
    trunk = spec.trunk
    match trunk.kind:
        case "conv":
            x = batch.transpose(0, 3, 1, 2)
            for i in range(len(trunk.channels)):
                try:
                    weight = params[f"trunk.conv{i}.weight"]
                    bias = params[f"trunk.conv{i}.bias"]
                except KeyError as e:
                    raise SpecError(f"Missing trunk parameter {e.args[0]!r}") from e
                x = relu(conv2d(x, weight, bias, stride=2, padding=1))
            return global_avg_pool(x)
        case "mlp":
            flat = batch.reshape(batch.shape[0], trunk.input_dim)
            return mlp_forward(trunk.mlp, params, flat, "trunk.")


def encode(
    spec: EncoderSpec,
    params: Mapping[str, Tensor],
    images: ArrayLike | Tensor,
    *,
    with_predictor: bool = True,
) -> Taps:
    """Forward pass returning the representation at every tap.

    Teacher parameter sets carry no predictor; pass `with_predictor=False` for them.
    """
    backbone = encode_backbone(spec, params, images)

    projector = backbone
    if (projector_spec := spec.projector_spec) is not None:
        projector = mlp_forward(projector_spec, params, backbone, "projector.")

    predictor = None
    if with_predictor and (predictor_spec := spec.predictor_spec) is not None:
        predictor = mlp_forward(predictor_spec, params, projector, "predictor.")

    pixels = None
    if spec.pixel_head:
        pixels = mlp_forward(
            MlpSpec(widths=(spec.trunk.backbone_dim, spec.trunk.input_dim)),
            params,
            backbone,
            "pixel_head.",
        )

    return Taps(backbone, projector, predictor, pixels)
