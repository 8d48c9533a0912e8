from __future__ import annotations

import logging
from typing import Annotated, Mapping

import numpy as np
from pydantic import Field, model_validator

from sslforge.core.base import FrozenForgeModel
from sslforge.errors import SpecError
from sslforge.tensor import Tensor, batch_norm_rows, relu

logger = logging.getLogger(__name__)

Params = dict[str, Tensor]
"""Flat, name-keyed parameter set, eg. `projector.0.weight`."""


class MlpSpec(FrozenForgeModel):
    """Affine layers with ReLU between them and nothing after the last."""

    widths: tuple[Annotated[int, Field(gt=0)], ...]
    """Input width followed by the output width of every layer."""
    batch_norm: tuple[bool, ...] | None = None
    """Per-layer flag: standardize the affine output over the batch rows."""

    @model_validator(mode="after")
    def _check_layers(self):
        if len(self.widths) < 2:
            raise ValueError(f"An MLP needs at least one layer, got widths {self.widths}")
        if self.batch_norm is not None and len(self.batch_norm) != self.n_layers:
            raise ValueError(
                f"Expected {self.n_layers} batch_norm flags, got {len(self.batch_norm)}"
            )
        return self

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def uses_batch_norm(self, layer: int) -> bool:
        return self.batch_norm is not None and self.batch_norm[layer]


def glorot_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    fan_in: int,
    fan_out: int,
) -> np.ndarray:
    limit = np.sqrt(6 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_mlp(spec: MlpSpec, rng: np.random.Generator, prefix: str = "") -> Params:
    params: Params = {}
    for i, (fan_in, fan_out) in enumerate(zip(spec.widths, spec.widths[1:])):
        weight = glorot_uniform(rng, (fan_in, fan_out), fan_in, fan_out)
        params[f"{prefix}{i}.weight"] = Tensor(weight, requires_grad=True)
        params[f"{prefix}{i}.bias"] = Tensor(np.zeros(fan_out), requires_grad=True)
    return params


def mlp_forward(
    spec: MlpSpec,
    params: Mapping[str, Tensor],
    X: Tensor,
    prefix: str = "",
) -> Tensor:
    if X.ndim != 2 or X.shape[1] != spec.in_dim:
        raise SpecError(f"MLP expects (n, {spec.in_dim}) input, got {X.shape}")

    out = X
    for i in range(spec.n_layers):
        try:
            weight = params[f"{prefix}{i}.weight"]
            bias = params[f"{prefix}{i}.bias"]
        except KeyError as e:
            raise SpecError(f"Missing MLP parameter {e.args[0]!r}") from e

        out = out @ weight + bias
        if spec.uses_batch_norm(i):
            out = batch_norm_rows(out)
        if i < spec.n_layers - 1:
            out = relu(out)
    return out
