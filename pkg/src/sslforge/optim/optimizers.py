"""Functional optimizers: every step returns new parameters and a new state."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping

import numpy as np

from sslforge.errors import DimensionError, ParameterError
from sslforge.tensor import Array, Tensor

logger = logging.getLogger(__name__)

OptimizerKind = Literal["sgd", "adam"]

Grads = Mapping[str, Array]


def decay_exempt(name: str) -> bool:
    """Biases and normalization parameters get no weight decay."""
    leaf = name.rsplit(".", 1)[-1]
    return leaf == "bias" or ".bn" in name or "norm" in name


@dataclass(frozen=True)
class OptimState:
    kind: OptimizerKind
    lr: float
    weight_decay: float = 0.0
    momentum: float = 0.9
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    first: Mapping[str, Array] = field(default_factory=dict)
    """Momentum buffers (sgd) or first moments (adam)."""
    second: Mapping[str, Array] = field(default_factory=dict)
    exempt: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0:
            raise ParameterError(
                f"lr and weight_decay must be non-negative, got {self.lr}, {self.weight_decay}"
            )
        if not 0 <= self.momentum < 1 or not all(0 <= b < 1 for b in self.betas):
            raise ParameterError("momentum and betas must be in [0, 1)")

    @classmethod
    def create(
        cls,
        kind: OptimizerKind,
        params: Mapping[str, Tensor],
        *,
        lr: float,
        weight_decay: float = 0.0,
        momentum: float = 0.9,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        exempt_bias_and_norm: bool = True,
    ) -> OptimState:
        zeros = {name: np.zeros(p.shape) for name, p in params.items()}
        exempt = frozenset(
            name for name in params if exempt_bias_and_norm and decay_exempt(name)
        )
        return cls(
            kind=kind,
            lr=lr,
            weight_decay=weight_decay,
            momentum=momentum,
            betas=betas,
            eps=eps,
            first=zeros,
            second=dict(zeros) if kind == "adam" else {},
            exempt=exempt,
        )

    def with_lr(self, lr: float) -> OptimState:
        return replace(self, lr=lr)

    def decay_for(self, name: str) -> float:
        return 0.0 if name in self.exempt else self.weight_decay


def _grad_for(name: str, param: Tensor, grads: Grads) -> Array:
    grad = grads.get(name)
    if grad is None:
        # parameters outside this step's graph
        return np.zeros(param.shape)
    if grad.shape != param.shape:
        raise DimensionError(f"gradient of {name}", param.shape, grad.shape)
    return grad


def sgd_step(
    params: Mapping[str, Tensor],
    grads: Grads,
    state: OptimState,
) -> tuple[dict[str, Tensor], OptimState]:
    """v ← βv + g; p ← p − lr·v − lr·λ·p."""
    new_params: dict[str, Tensor] = {}
    velocity: dict[str, Array] = {}
    for name, param in params.items():
        g = _grad_for(name, param, grads)
        v = state.momentum * state.first.get(name, 0.0) + g
        p = param.data - state.lr * v - state.lr * state.decay_for(name) * param.data
        new_params[name] = Tensor(p, requires_grad=True, name=name)
        velocity[name] = v
    return new_params, replace(state, step=state.step + 1, first=velocity)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Grads,
    state: OptimState,
) -> tuple[dict[str, Tensor], OptimState]:
    """Bias-corrected adaptive moments with decoupled weight decay."""
    beta1, beta2 = state.betas
    t = state.step + 1
    new_params: dict[str, Tensor] = {}
    first: dict[str, Array] = {}
    second: dict[str, Array] = {}
    for name, param in params.items():
        g = _grad_for(name, param, grads)
        m = beta1 * state.first.get(name, 0.0) + (1 - beta1) * g
        v = beta2 * state.second.get(name, 0.0) + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = (
            param.data
            - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
            - state.lr * state.decay_for(name) * param.data
        )
        new_params[name] = Tensor(p, requires_grad=True, name=name)
        first[name], second[name] = m, v
    return new_params, replace(state, step=t, first=first, second=second)


def optimizer_step(
    params: Mapping[str, Tensor],
    grads: Grads,
    state: OptimState,
) -> tuple[dict[str, Tensor], OptimState]:
    match state.kind:
        case "sgd":
            return sgd_step(params, grads, state)
        case "adam":
            return adam_step(params, grads, state)
