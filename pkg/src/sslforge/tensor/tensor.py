"""Dense float64 tensors with a reverse-mode gradient tape.

Every operation returns a new `Tensor`; arrays are read-only, so a tracked value can
never change under its tape. An operation records a `Node` only when at least one
input requires a gradient, which is how teacher branches and evaluation code run
untracked for free.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from sslforge.errors import ContractError, DimensionError
from sslforge.utils import TRACE

logger = logging.getLogger(__name__)

Array: TypeAlias = NDArray[np.float64]

Axis: TypeAlias = int | tuple[int, ...] | None

BackwardFn = Callable[[Array], Sequence[Array | None]]
"""Maps the gradient of an op's output to one gradient (or None) per parent."""

Operand: TypeAlias = "Tensor | ArrayLike"


@dataclass(frozen=True, slots=True)
class Node:
    op: str
    parents: tuple[Tensor, ...]
    backward: BackwardFn


class Tensor:
    __slots__ = ("data", "requires_grad", "node", "grad", "name", "_consumed")

    # make `ndarray <op> Tensor` defer to the Tensor's reflected operator
    __array_ufunc__ = None

    data: Array
    requires_grad: bool
    node: Node | None
    grad: Array | None
    name: str | None

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        name: str | None = None,
    ):
        array = np.array(data, dtype=np.float64)
        array.flags.writeable = False
        self.data = array
        self.requires_grad = requires_grad
        self.node = None
        self.grad = None
        self.name = name
        self._consumed = False

    @classmethod
    def from_op(
        cls,
        data: ArrayLike,
        op: str,
        parents: Iterable[Tensor],
        backward: BackwardFn,
    ) -> Tensor:
        parents = tuple(parents)
        out = cls.__new__(cls)
        array = np.asarray(data, dtype=np.float64)
        if array.flags.writeable:
            array.flags.writeable = False
        out.data = array
        out.requires_grad = any(p.requires_grad for p in parents)
        out.node = Node(op, parents, backward) if out.requires_grad else None
        out.grad = None
        out.name = None
        out._consumed = False
        return out

    # properties

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        tracked = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tracked}{label})"

    # operators

    def __add__(self, other: Operand) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Operand) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Operand) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Operand) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Operand) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Operand) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Operand) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> Tensor:
        return div(other, self)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __pow__(self, exponent: float) -> Tensor:
        return power(self, exponent)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index: object) -> Tensor:
        return getitem(self, index)

    # method forms

    def sum(self, axis: Axis = None, keepdims: bool = False) -> Tensor:
        return sum_(self, axis, keepdims)

    def mean(self, axis: Axis = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def reshape(self, *shape: int) -> Tensor:
        return reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        return transpose(self, axes or None)

    def exp(self) -> Tensor:
        return exp(self)

    def log(self) -> Tensor:
        return log(self)

    def sqrt(self) -> Tensor:
        return sqrt(self)

    def relu(self) -> Tensor:
        return relu(self)


def as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def stop_gradient(t: Tensor) -> Tensor:
    """Same values, no tape: nothing upstream receives gradient through the result."""
    out = Tensor.__new__(Tensor)
    out.data = t.data
    out.requires_grad = False
    out.node = None
    out.grad = None
    out.name = t.name
    out._consumed = False
    return out


def unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sums `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape) from None


# elementwise


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return Tensor.from_op(
        a.data + b.data,
        "add",
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return Tensor.from_op(
        a.data - b.data,
        "sub",
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return Tensor.from_op(
        a.data * b.data,
        "mul",
        (a, b),
        lambda g: (
            unbroadcast(g * b.data, a.shape),
            unbroadcast(g * a.data, b.shape),
        ),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    return Tensor.from_op(
        a.data / b.data,
        "div",
        (a, b),
        lambda g: (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, "neg", (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    return Tensor.from_op(
        a.data**exponent,
        f"pow{exponent}",
        (a,),
        lambda g: (g * exponent * a.data ** (exponent - 1),),
    )


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor.from_op(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return Tensor.from_op(np.log(a.data), "log", (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    """Square root whose gradient is 0 (not inf) where the input is 0."""
    out = np.sqrt(a.data)

    def backward(g: Array):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return Tensor.from_op(out, "sqrt", (a,), backward)


def relu(a: Tensor) -> Tensor:
    return Tensor.from_op(
        np.maximum(a.data, 0.0),
        "relu",
        (a,),
        lambda g: (g * (a.data > 0),),
    )


def maximum(a: Tensor, floor: float) -> Tensor:
    """Elementwise max against a scalar; gradient passes where `a > floor`."""
    return Tensor.from_op(
        np.maximum(a.data, floor),
        "maximum",
        (a,),
        lambda g: (g * (a.data > floor),),
    )


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)
    return Tensor.from_op(out, "sigmoid", (a,), lambda g: (g * out * (1 - out),))


def log_sigmoid(a: Tensor) -> Tensor:
    """log σ(a), stable for large |a|."""
    return Tensor.from_op(
        -np.logaddexp(0.0, -a.data),
        "log_sigmoid",
        (a,),
        lambda g: (g * expit(-a.data),),
    )


# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)
    return Tensor.from_op(
        a.data @ b.data,
        "matmul",
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


# reductions


def _expand(g: Array, shape: tuple[int, ...], axis: Axis, keepdims: bool) -> Array:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Tensor.from_op(
        a.data.sum(axis=axis, keepdims=keepdims),
        "sum",
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims),),
    )


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return sum_(a, axis, keepdims) / count


# shape manipulation


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError("reshape", a.shape, shape) from None
    return Tensor.from_op(out, "reshape", (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    inverse = None if axes is None else tuple(np.argsort(axes))
    return Tensor.from_op(
        a.data.transpose(axes),
        "transpose",
        (a,),
        lambda g: (g.transpose(inverse),),
    )


def getitem(a: Tensor, index: object) -> Tensor:
    def backward(g: Array):
        full = np.zeros(a.shape)
        np.add.at(full, index, g)  # pyright: ignore[reportGeneralTypeIssues]
        return (full,)

    return Tensor.from_op(a.data[index], "getitem", (a,), backward)  # pyright: ignore


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("concat() needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("concat", *(t.shape for t in tensors)) from None
    splits = np.cumsum(sizes)[:-1]
    return Tensor.from_op(
        out,
        "concat",
        tensors,
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


# backpropagation


def _topological_order(root: Tensor) -> list[Tensor]:
    """Tracked tensors reachable from `root`, every tensor after its parents."""
    order = list[Tensor]()
    visited = set[int]()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in reversed(tensor.node.parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor) -> dict[Tensor, Array]:
    """Accumulates d(loss)/d(leaf) into `leaf.grad` for every tracked leaf and returns
    the map of leaf gradients.

    A loss can only be backpropagated once; `zero_grad(loss, ...)` resets it.
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward() called on a tensor that is not on a tape")
    if loss._consumed:
        raise ContractError(
            "backward() was already called on this loss; call zero_grad() first"
        )

    order = _topological_order(loss)
    logger.log(TRACE, f"backward over {len(order)} tensors")

    pending: dict[int, Array] = {id(loss): np.ones(loss.shape)}
    leaves = dict[Tensor, Array]()
    for tensor in reversed(order):
        grad = pending.pop(id(tensor), None)
        if grad is None:
            continue

        if tensor.node is None:
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
            leaves[tensor] = tensor.grad
            continue

        parent_grads = tensor.node.backward(grad)
        for parent, parent_grad in zip(tensor.node.parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + parent_grad
            else:
                pending[key] = parent_grad

    loss._consumed = True
    return leaves


def zero_grad(*tensors: Tensor):
    """Clears leaf gradients and the used-up flag of losses."""
    for tensor in tensors:
        tensor.grad = None
        tensor._consumed = False
