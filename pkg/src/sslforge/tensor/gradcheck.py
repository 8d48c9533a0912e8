"""Central finite differences and the analytic-vs-numeric gradient report."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike

from sslforge.errors import ContractError, ParameterError

from .tensor import Array, Tensor, backward

REL_ERROR_FLOOR = 1e-8

ScalarFn = Callable[[Tensor], Tensor | float]


def _scalar(value: Tensor | float) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def finite_diff_grad(f: ScalarFn, x: Tensor | ArrayLike, h: float = 1e-5) -> Tensor:
    """(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h for every coordinate i."""
    if h <= 0:
        raise ParameterError(f"Step h must be positive, got {h}")

    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    for index in np.ndindex(base.shape):
        original = base[index]
        base[index] = original + h
        plus = _scalar(f(Tensor(base)))
        base[index] = original - h
        minus = _scalar(f(Tensor(base)))
        base[index] = original
        grad[index] = (plus - minus) / (2 * h)
    return Tensor(grad)


def relative_error(a: Array, b: Array) -> Array:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_ERROR_FLOOR)


@dataclass(frozen=True)
class GradReport:
    analytic: dict[str, Array]
    numeric: dict[str, Array]
    max_rel_error: float

    def worst(self) -> tuple[str, float]:
        """Input name with the largest relative error."""
        errors = {
            name: float(relative_error(self.analytic[name], self.numeric[name]).max())
            for name in self.analytic
        }
        name = max(errors, key=errors.__getitem__)
        return name, errors[name]


def check_gradients(
    f: Callable[..., Tensor],
    inputs: Mapping[str, ArrayLike],
    h: float = 1e-5,
) -> GradReport:
    """Compares backward() against finite differences for every named input of
    `f(**tensors)`, which must return a scalar tensor."""
    values = {name: np.array(value, dtype=np.float64) for name, value in inputs.items()}
    if not values:
        raise ContractError("check_gradients() needs at least one input")

    leaves = {name: Tensor(value, requires_grad=True, name=name) for name, value in values.items()}
    backward(f(**leaves))
    analytic = {
        name: leaf.grad if leaf.grad is not None else np.zeros_like(values[name])
        for name, leaf in leaves.items()
    }

    numeric = dict[str, Array]()
    for name in values:
        fixed = {other: Tensor(v) for other, v in values.items() if other != name}
        numeric[name] = finite_diff_grad(
            lambda x: f(**fixed, **{name: x}),
            values[name],
            h,
        ).data

    max_error = max(
        float(relative_error(analytic[name], numeric[name]).max(initial=0.0))
        for name in values
    )
    return GradReport(analytic=analytic, numeric=numeric, max_rel_error=max_error)
