"""Self-distillation objectives: a student matches a target branch that gets no gradient."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import softmax

from sslforge.errors import DimensionError, ParameterError
from sslforge.nets.teacher import assert_untracked
from sslforge.tensor import Tensor, l2_normalize_rows, log_softmax_rows, stop_gradient

logger = logging.getLogger(__name__)


def _normalized_sq_distance(p: Tensor, t: Tensor) -> Tensor:
    if p.shape != t.shape or p.ndim != 2:
        raise DimensionError("normalized squared distance", p.shape, t.shape)
    diff = l2_normalize_rows(p) - l2_normalize_rows(t)
    return (diff * diff).sum(axis=1).mean()


def byol_loss(student_pred: Tensor, teacher_proj: Tensor) -> Tensor:
    """Mean ‖p/‖p‖ − t/‖t‖‖² over the batch; the teacher side must be untracked."""
    assert_untracked(teacher_proj, "teacher projection")
    return _normalized_sq_distance(student_pred, teacher_proj)


def simsiam_loss(
    pred_1: Tensor,
    proj_2: Tensor,
    pred_2: Tensor | None = None,
    proj_1: Tensor | None = None,
) -> Tensor:
    """BYOL's form with a stop-gradient target; averaged over both orderings when the
    second view's outputs are given."""
    loss = _normalized_sq_distance(pred_1, stop_gradient(proj_2))
    if pred_2 is None or proj_1 is None:
        return loss
    return (loss + _normalized_sq_distance(pred_2, stop_gradient(proj_1))) / 2


def symmetrized(
    loss: Callable[[Tensor, Tensor], Tensor],
    preds: tuple[Tensor, Tensor],
    targets: tuple[Tensor, Tensor],
) -> Tensor:
    """(loss(p₁, t₂) + loss(p₂, t₁)) / 2"""
    return (loss(preds[0], targets[1]) + loss(preds[1], targets[0])) / 2


def dino_targets(
    teacher_out: Tensor | ArrayLike,
    center: ArrayLike,
    tau_t: float = 0.05,
) -> np.ndarray:
    """softmax((t − c)/τ_t), computed off the tape."""
    if tau_t <= 0:
        raise ParameterError(f"Teacher temperature must be positive, got {tau_t}")
    values = teacher_out.data if isinstance(teacher_out, Tensor) else np.asarray(teacher_out)
    return softmax((values - np.asarray(center)) / tau_t, axis=1)


def dino_loss(
    student_out: Tensor,
    teacher_out: Tensor,
    center: ArrayLike,
    tau_s: float = 0.1,
    tau_t: float = 0.05,
) -> Tensor:
    """Mean cross-entropy H(target, prediction) with the centred, sharpened teacher as
    the target distribution."""
    assert_untracked(teacher_out, "teacher output")
    if student_out.shape != teacher_out.shape:
        raise DimensionError("dino_loss", student_out.shape, teacher_out.shape)
    if tau_s <= 0:
        raise ParameterError(f"Student temperature must be positive, got {tau_s}")

    targets = dino_targets(teacher_out, center, tau_t)
    return -(log_softmax_rows(student_out, tau_s) * targets).sum(axis=1).mean()
