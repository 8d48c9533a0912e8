__all__ = [
    "EmaScheduleKind",
    "LrScaling",
    "OptimState",
    "OptimizerKind",
    "ScheduleRow",
    "adam_step",
    "decay_exempt",
    "ema_momentum",
    "lr_at",
    "optimizer_step",
    "scaled_lr",
    "schedule_table",
    "sgd_step",
]

from .optimizers import (
    OptimizerKind,
    OptimState,
    adam_step,
    decay_exempt,
    optimizer_step,
    sgd_step,
)
from .schedules import (
    EmaScheduleKind,
    LrScaling,
    ScheduleRow,
    ema_momentum,
    lr_at,
    scaled_lr,
    schedule_table,
)
