"""The φ/ψ family: Σᵢ φ(Σⱼ ψ(‖zᵢ − zᵢ′‖² − ‖zᵢ − zⱼ‖²)) and its registry of known rows.

The inner sum runs over negatives j ∉ {i, i′} unless `include_partner` is set, in
which case it runs over every j ≠ i as the family is usually written.
"""

from __future__ import annotations

import logging
from typing import Annotated, Callable, Literal, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import Field

from sslforge.core.base import FrozenForgeModel
from sslforge.errors import DimensionError, ParameterError, SpecError
from sslforge.tensor import (
    Tensor,
    concat,
    exp,
    getitem,
    log,
    logsumexp_rows,
    pairwise_sq_dists,
    relu,
    sigmoid,
)

logger = logging.getLogger(__name__)


class _ScalarFnBase(FrozenForgeModel):
    def __call__(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def numpy(self, x: np.ndarray) -> np.ndarray:
        return self(Tensor(x)).data


class Identity(_ScalarFnBase):
    kind: Literal["identity"] = "identity"

    def __call__(self, x: Tensor) -> Tensor:
        return x


class Affine(_ScalarFnBase):
    kind: Literal["affine"] = "affine"
    scale: float = 1.0
    shift: float = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        return self.scale * x + self.shift


class Exp(_ScalarFnBase):
    """e^{x/τ + shift}"""

    kind: Literal["exp"] = "exp"
    tau: Annotated[float, Field(gt=0)] = 1.0
    shift: float = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        return exp(x / self.tau + self.shift)


class Relu(_ScalarFnBase):
    """[x + shift]₊"""

    kind: Literal["relu"] = "relu"
    shift: float = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        return relu(x + self.shift)


class Log(_ScalarFnBase):
    """scale · log(eps + x)"""

    kind: Literal["log"] = "log"
    scale: float = 1.0
    eps: Annotated[float, Field(ge=0)] = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        return self.scale * log(self.eps + x)


class ReluLogSquared(_ScalarFnBase):
    """[log x]₊²"""

    kind: Literal["relu_log_squared"] = "relu_log_squared"

    def __call__(self, x: Tensor) -> Tensor:
        return relu(log(x)) ** 2


class Sigmoid(_ScalarFnBase):
    """sigmoid(c·x)"""

    kind: Literal["sigmoid"] = "sigmoid"
    c: float = 1.0

    def __call__(self, x: Tensor) -> Tensor:
        return sigmoid(self.c * x)


ScalarFn = Annotated[
    Union[Identity, Affine, Exp, Relu, Log, ReluLogSquared, Sigmoid],
    Field(discriminator="kind"),
]

# φ only sees sums of ψ values, which are positive for every registry row
PHI_GRID = np.linspace(1e-3, 20.0, 401)
PSI_GRID = np.linspace(-8.0, 8.0, 401)


def _check_monotone(name: str, fn: _ScalarFnBase, grid: np.ndarray):
    with np.errstate(all="ignore"):
        values = fn.numpy(grid)
    if np.isnan(values).any():
        raise SpecError(f"{name} = {fn!r} is undefined on part of its domain")
    if (np.diff(values) < -1e-12).any():
        raise SpecError(f"{name} = {fn!r} is not monotonically increasing")


class PhiPsiSpec(FrozenForgeModel):
    phi: ScalarFn
    psi: ScalarFn

    def check(self) -> PhiPsiSpec:
        """Raises SpecError unless φ and ψ are non-decreasing on a numeric grid."""
        _check_monotone("phi", self.phi, PHI_GRID)
        _check_monotone("psi", self.psi, PSI_GRID)
        return self


RegistryRow = Literal[
    "infonce",
    "mine",
    "triplet",
    "soft_triplet",
    "n_plus_1_tuplet",
    "lifted_structured",
    "modified_triplet",
    "triplet_contrastive",
]

_REGISTRY: dict[str, Callable[[float, float, float], PhiPsiSpec]] = {
    "infonce": lambda tau, eps, c: PhiPsiSpec(
        phi=Log(scale=tau, eps=eps), psi=Exp(tau=tau)
    ),
    "mine": lambda tau, eps, c: PhiPsiSpec(phi=Log(), psi=Exp()),
    "triplet": lambda tau, eps, c: PhiPsiSpec(phi=Identity(), psi=Relu(shift=eps)),
    "soft_triplet": lambda tau, eps, c: PhiPsiSpec(
        phi=Log(scale=tau, eps=1.0), psi=Exp(tau=tau, shift=eps)
    ),
    "n_plus_1_tuplet": lambda tau, eps, c: PhiPsiSpec(phi=Log(eps=1.0), psi=Exp()),
    "lifted_structured": lambda tau, eps, c: PhiPsiSpec(
        phi=ReluLogSquared(), psi=Exp(shift=eps)
    ),
    "modified_triplet": lambda tau, eps, c: PhiPsiSpec(phi=Identity(), psi=Sigmoid(c=c)),
    "triplet_contrastive": lambda tau, eps, c: PhiPsiSpec(phi=Identity(), psi=Identity()),
}

REGISTRY_ROWS = tuple(_REGISTRY)


def registry_spec(
    name: RegistryRow | str,
    tau: float = 1.0,
    eps: float = 1.0,
    c: float = 1.0,
) -> PhiPsiSpec:
    if (factory := _REGISTRY.get(name)) is None:
        raise SpecError(f"Unknown loss row {name!r}, expected one of {REGISTRY_ROWS}")
    return factory(tau, eps, c).check()


def _partner_array(Z: Tensor, partner: ArrayLike) -> np.ndarray:
    partner = np.asarray(partner, dtype=np.int64)
    n = Z.shape[0]
    if Z.ndim != 2 or partner.shape != (n,):
        raise DimensionError("generalized loss view map", Z.shape, partner.shape)
    if ((partner < 0) | (partner >= n) | (partner == np.arange(n))).any():
        raise ParameterError("Every row needs a partner row other than itself")
    return partner


def _negative_mask(n: int, partner: np.ndarray, include_partner: bool) -> np.ndarray:
    mask = ~np.eye(n, dtype=bool)
    if not include_partner:
        mask[np.arange(n), partner] = False
    return mask


def generalized_terms(
    Z: Tensor,
    partner: ArrayLike,
    spec: PhiPsiSpec,
    *,
    include_partner: bool = False,
) -> Tensor:
    """φ(Σⱼ ψ(‖zᵢ − zᵢ′‖² − ‖zᵢ − zⱼ‖²)) for every anchor i, shape (n,)."""
    spec.check()
    partner = _partner_array(Z, partner)
    n = Z.shape[0]
    mask = _negative_mask(n, partner, include_partner)

    D2 = pairwise_sq_dists(Z)
    d_pos = getitem(D2, (np.arange(n), partner)).reshape(n, 1)
    # excluded entries are zeroed before ψ so they cannot overflow
    gaps = (d_pos - D2) * mask
    inner = (spec.psi(gaps) * mask).sum(axis=1)
    return spec.phi(inner)


def generalized_loss(
    Z: Tensor,
    partner: ArrayLike,
    spec: PhiPsiSpec,
    *,
    include_partner: bool = False,
) -> Tensor:
    """Σᵢ of `generalized_terms`.

    By default the positive partner i′ is left out of the inner sum, which makes the
    InfoNCE row with ε = 0 equal to DCL. Pass `include_partner=True` for the sum over
    every j ≠ i.
    """
    return generalized_terms(Z, partner, spec, include_partner=include_partner).sum()


def generalized_nce(
    Z: Tensor,
    partner: ArrayLike,
    tau: float,
    eps: float,
    *,
    include_partner: bool = False,
) -> Tensor:
    """−τ Σᵢ log(e^{−dᵢ²/τ} / (ε·e^{−dᵢ²/τ} + Σⱼ e^{−dᵢⱼ²/τ})), written out directly."""
    if tau <= 0:
        raise ParameterError(f"Temperature must be positive, got {tau}")
    if eps < 0:
        raise ParameterError(f"eps must be non-negative, got {eps}")
    partner = _partner_array(Z, partner)
    n = Z.shape[0]
    mask = _negative_mask(n, partner, include_partner)

    logits = -pairwise_sq_dists(Z) / tau
    positive = getitem(logits, (np.arange(n), partner)).reshape(n, 1)

    if eps > 0:
        columns = concat([positive + float(np.log(eps)), logits], axis=1)
        admitted = np.concatenate([np.ones((n, 1), dtype=bool), mask], axis=1)
    else:
        columns, admitted = logits, mask
    return -tau * (positive - logsumexp_rows(columns, admitted)).sum()
