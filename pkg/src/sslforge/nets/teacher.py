"""The momentum teacher: EMA parameter updates, the momentum schedule and DINO centering.

Teacher parameters are plain arrays. They only ever enter the graph as untracked
tensors, so no gradient map can reach them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Literal, Mapping

import numpy as np
from numpy.typing import ArrayLike

from sslforge.errors import ContractError, ParameterError, SpecError
from sslforge.tensor import Array, Tensor

logger = logging.getLogger(__name__)

EmaScope = Literal["all", "projector"]

STUDENT_ONLY_PREFIXES = ("predictor.", "pixel_head.")


@dataclass(frozen=True)
class TeacherState:
    params: Mapping[str, Array]
    xi: float
    center: Array | None = None

    def __post_init__(self):
        if not 0 <= self.xi <= 1:
            raise ParameterError(f"EMA momentum must be in [0, 1], got {self.xi}")

    def tensors(self) -> dict[str, Tensor]:
        """Untracked tensors for a forward pass."""
        return {name: Tensor(value) for name, value in self.params.items()}

    def with_center(self, center: Array | None) -> TeacherState:
        return replace(self, center=center)


def mirrors(name: str) -> bool:
    return not name.startswith(STUDENT_ONLY_PREFIXES)


def teacher_from_student(
    student: Mapping[str, Tensor],
    xi: float = 0.996,
    center_dim: int | None = None,
) -> TeacherState:
    params = {
        name: np.array(value.data) for name, value in student.items() if mirrors(name)
    }
    center = np.zeros(center_dim) if center_dim is not None else None
    return TeacherState(params, xi, center)


def ema_update(
    teacher: TeacherState,
    student: Mapping[str, Tensor],
    xi: float,
    scope: EmaScope = "all",
) -> TeacherState:
    """θt ← ξ·θt + (1 − ξ)·θs for every mirrored parameter.

    With `scope="projector"` the teacher trunk is copied from the student instead.
    """
    if not 0 <= xi <= 1:
        raise ParameterError(f"EMA momentum must be in [0, 1], got {xi}")

    params: dict[str, Array] = {}
    for name, theta_t in teacher.params.items():
        if name not in student:
            raise SpecError(f"Teacher parameter {name!r} has no student counterpart")
        theta_s = student[name].data
        if theta_s.shape != theta_t.shape:
            raise SpecError(
                f"{name}: teacher shape {theta_t.shape} != student shape {theta_s.shape}"
            )
        if scope == "projector" and name.startswith("trunk."):
            params[name] = np.array(theta_s)
        else:
            params[name] = xi * theta_t + (1 - xi) * theta_s

    return replace(teacher, params=params, xi=xi)


def ema_schedule(step: int, total_steps: int, start: float = 0.996) -> float:
    """Cosine ramp of the momentum from `start` at step 0 to 1 at the last step."""
    if not 0 <= step <= max(total_steps, 0):
        raise ParameterError(f"step must be in [0, {total_steps}], got {step}")
    if total_steps == 0:
        return start
    return 1 - (1 - start) * (math.cos(math.pi * step / total_steps) + 1) / 2


def center_update(
    center: ArrayLike,
    teacher_output: Tensor | ArrayLike,
    m: float = 0.9,
) -> Array:
    """c ← m·c + (1 − m)·(mean of the teacher batch rows)."""
    if not 0 <= m < 1:
        raise ParameterError(f"Center momentum must be in [0, 1), got {m}")
    output = teacher_output.data if isinstance(teacher_output, Tensor) else teacher_output
    output = np.asarray(output, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if output.ndim != 2 or output.shape[1:] != center.shape:
        raise SpecError(
            f"Center of shape {center.shape} cannot track outputs of shape {output.shape}"
        )
    return m * center + (1 - m) * output.mean(axis=0)


def assert_untracked(tensors: Mapping[str, Tensor] | Tensor, what: str = "teacher"):
    """Raises if any teacher-side value would receive gradients."""
    items = tensors.items() if isinstance(tensors, Mapping) else [(what, tensors)]
    for name, value in items:
        if value.requires_grad:
            raise ContractError(f"{what} value {name!r} is tracked by the gradient tape")


def assert_detached(
    teacher: TeacherState,
    student: Mapping[str, Tensor],
    grads: Mapping[str, Array] | None = None,
):
    """Raises if a teacher array is, or overlaps, a student parameter or gradient.

    Such an array would follow the optimizer instead of the EMA.
    """
    student_arrays = [(f"student {name!r}", value.data) for name, value in student.items()]
    if grads is not None:
        student_arrays += [(f"gradient {name!r}", value) for name, value in grads.items()]

    for name, theta_t in teacher.params.items():
        for what, array in student_arrays:
            if np.shares_memory(theta_t, array):
                raise ContractError(f"Teacher parameter {name!r} shares memory with {what}")
