"""Noise-contrastive estimation: the binary data-vs-noise density fit and the
non-parametric softmax with a proximal memory term."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, Literal, Protocol, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import Field, model_validator
from scipy.stats import norm

from sslforge.core.base import FrozenForgeModel
from sslforge.errors import ContractError, DimensionError, ParameterError
from sslforge.optim import OptimState, adam_step, lr_at
from sslforge.tensor import (
    Array,
    Tensor,
    backward,
    cosine_similarity_matrix,
    getitem,
    log_sigmoid,
    logsumexp_rows,
)

from .contrastive import check_tau

logger = logging.getLogger(__name__)


def wu_nce_loss(Z: Tensor, memory: Tensor | ArrayLike, tau: float, beta: float) -> Tensor:
    """−Σᵢ log(e^{CoSim(zᵢ, mᵢ)/τ} / Σₖ e^{CoSim(zᵢ, zₖ)/τ}) + β‖Z − M‖²_F.

    `memory` holds each row's embedding from the previous step and is never tracked.
    """
    check_tau(tau)
    if beta < 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    M = Tensor(memory.data if isinstance(memory, Tensor) else memory)
    if M.shape != Z.shape:
        raise DimensionError("wu_nce_loss memory", Z.shape, M.shape)

    n = Z.shape[0]
    S = cosine_similarity_matrix(Z, Z) / tau
    own = getitem(cosine_similarity_matrix(Z, M) / tau, (np.arange(n), np.arange(n)))
    lse = logsumexp_rows(S).reshape(n)
    proximal = ((Z - M) ** 2).sum()
    return (lse - own).sum() + beta * proximal


# binary NCE


class NoiseDistribution(Protocol):
    def sample(self, rng: np.random.Generator, n: int) -> Array:
        ...

    def log_density(self, x: Array) -> Array:
        ...


class GaussianNoise(FrozenForgeModel):
    kind: Literal["gaussian"] = "gaussian"
    mean: float = 0.0
    std: Annotated[float, Field(gt=0)] = 1.5

    def sample(self, rng: np.random.Generator, n: int) -> Array:
        return rng.normal(self.mean, self.std, size=n)

    def quantiles(self, n: int) -> Array:
        """n evenly spaced quantiles, a low-variance stand-in for `sample`."""
        return norm.ppf((np.arange(n) + 0.5) / n, self.mean, self.std)

    def log_density(self, x: Array) -> Array:
        return norm.logpdf(x, self.mean, self.std)


class UniformNoise(FrozenForgeModel):
    kind: Literal["uniform"] = "uniform"
    low: float = -5.0
    high: float = 5.0

    @model_validator(mode="after")
    def _check_bounds(self):
        if self.low >= self.high:
            raise ValueError(f"Empty interval [{self.low}, {self.high}]")
        return self

    def sample(self, rng: np.random.Generator, n: int) -> Array:
        return rng.uniform(self.low, self.high, size=n)

    def quantiles(self, n: int) -> Array:
        return self.low + (self.high - self.low) * (np.arange(n) + 0.5) / n

    def log_density(self, x: Array) -> Array:
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, -math.log(self.high - self.low), -np.inf)


Noise = Annotated[Union[GaussianNoise, UniformNoise], Field(discriminator="kind")]


def noise_ratio(data_fraction: float) -> float:
    """η = (1 − s)/s for a data fraction s of all samples."""
    if not 0 < data_fraction <= 1:
        raise ParameterError(f"Data fraction must be in (0, 1], got {data_fraction}")
    return (1 - data_fraction) / data_fraction


class LogQuadratic:
    """log f(x) = a₀ + a₁x + a₂x²; with the scalar c, log f + c is the fitted log-density."""

    names = ("a0", "a1", "a2", "c")

    @staticmethod
    def init() -> dict[str, Tensor]:
        start = {"a0": 0.0, "a1": 0.0, "a2": -0.1, "c": 0.0}
        return {k: Tensor(v, requires_grad=True, name=k) for k, v in start.items()}

    @staticmethod
    def log_model(params: dict[str, Tensor], x: Array) -> Tensor:
        """log f(x) + c"""
        return params["a0"] + params["a1"] * x + params["a2"] * (x * x) + params["c"]

    @staticmethod
    def evaluate(params: dict[str, Tensor], x: ArrayLike) -> Array:
        return LogQuadratic.log_model(params, np.asarray(x, dtype=np.float64)).data


def nce_objective(
    params: dict[str, Tensor],
    data: Array,
    noise_samples: Array,
    noise: NoiseDistribution,
    eta: float,
) -> Tensor:
    """Mean logistic loss of telling data (T=1) from noise (T=0).

    G(v) = log f(v) + c − log η − log p_ε(v) is the log-odds of p(T=1 | v).
    """
    log_eta = math.log(eta)
    g_data = LogQuadratic.log_model(params, data) - (log_eta + noise.log_density(data))
    g_noise = LogQuadratic.log_model(params, noise_samples) - (
        log_eta + noise.log_density(noise_samples)
    )
    total = len(data) + len(noise_samples)
    return -(log_sigmoid(g_data).sum() + log_sigmoid(-g_noise).sum()) / total


@dataclass
class NceFit:
    params: dict[str, Tensor]
    eta: float
    losses: list[float] = field(default_factory=list)

    @property
    def theta(self) -> Array:
        return np.array([self.params[k].item() for k in ("a0", "a1", "a2")])

    @property
    def c(self) -> float:
        return self.params["c"].item()

    def log_density(self, x: ArrayLike) -> Array:
        return LogQuadratic.evaluate(self.params, x)


def nce_binary_fit(
    data: ArrayLike,
    noise: NoiseDistribution,
    *,
    noise_samples: ArrayLike | None = None,
    rng: np.random.Generator | None = None,
    steps: int = 3000,
    lr: float = 0.05,
) -> NceFit:
    """Fits log f_θ + c to `data` by logistic discrimination against `noise`.

    Without explicit `noise_samples`, as many noise points as data points are drawn
    (η = 1). Adam with a cosine-decayed step size.
    """
    data = np.asarray(data, dtype=np.float64).ravel()
    if noise_samples is None:
        rng = rng or np.random.default_rng(0)
        noise_samples = noise.sample(rng, len(data))
    noise_samples = np.asarray(noise_samples, dtype=np.float64).ravel()
    if not len(data) or not len(noise_samples):
        raise ParameterError("NCE needs both data and noise samples")

    if not np.isfinite(noise.log_density(data)).all():
        raise ContractError("Noise density is zero on some data samples")

    eta = len(noise_samples) / len(data)
    params = LogQuadratic.init()
    state = OptimState.create("adam", params, lr=lr, exempt_bias_and_norm=False)
    fit = NceFit(params, eta)

    for step in range(steps):
        loss = nce_objective(params, data, noise_samples, noise, eta)
        grads = backward(loss)
        state = state.with_lr(lr_at(step, steps, 0, lr))
        named_grads = {k: grads.get(p, np.zeros(())) for k, p in params.items()}
        params, state = adam_step(params, named_grads, state)
        fit.losses.append(loss.item())
        if step % 500 == 0:
            logger.debug(f"NCE step {step}: loss {loss.item():.6f}")

    fit.params = params
    logger.info(f"NCE fit done: theta={fit.theta}, c={fit.c:.4f}, eta={eta:g}")
    return fit
