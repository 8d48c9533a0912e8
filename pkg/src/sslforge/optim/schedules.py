from __future__ import annotations

import math
from typing import Literal, NamedTuple

from sslforge.errors import ParameterError
from sslforge.nets.teacher import ema_schedule

LrScaling = Literal["linear", "sqrt", "none"]

EmaScheduleKind = Literal["cosine", "constant"]

REFERENCE_BATCH = 256


def scaled_lr(base_lr: float, effective_batch: int, rule: LrScaling = "linear") -> float:
    if effective_batch < 1:
        raise ParameterError(f"Batch size must be positive, got {effective_batch}")
    match rule:
        case "linear":
            return base_lr * effective_batch / REFERENCE_BATCH
        case "sqrt":
            return base_lr * math.sqrt(effective_batch) / REFERENCE_BATCH
        case "none":
            return base_lr


def lr_at(step: int, total: int, warmup_steps: int, peak: float) -> float:
    """Linear warmup from 0 to `peak`, then cosine decay to 0 at `total`."""
    if not 0 <= warmup_steps <= total:
        raise ParameterError(f"Need 0 <= warmup ({warmup_steps}) <= total ({total})")
    if not 0 <= step <= total:
        raise ParameterError(f"step must be in [0, {total}], got {step}")

    if step < warmup_steps:
        return peak * step / warmup_steps
    if total == warmup_steps:
        return peak
    progress = (step - warmup_steps) / (total - warmup_steps)
    return peak * (math.cos(math.pi * progress) + 1) / 2


def ema_momentum(
    step: int,
    total: int,
    start: float = 0.996,
    kind: EmaScheduleKind = "cosine",
) -> float:
    match kind:
        case "cosine":
            return ema_schedule(step, total, start)
        case "constant":
            return start


class ScheduleRow(NamedTuple):
    step: int
    lr: float
    ema_xi: float


def schedule_table(
    total: int,
    warmup_steps: int,
    peak: float,
    ema_start: float = 0.996,
    ema_kind: EmaScheduleKind = "cosine",
) -> list[ScheduleRow]:
    return [
        ScheduleRow(
            step=step,
            lr=lr_at(step, total, warmup_steps, peak),
            ema_xi=ema_momentum(step, total, ema_start, ema_kind),
        )
        for step in range(total + 1)
    ]
