"""Encoders, projector/predictor heads and the momentum teacher."""

__all__ = [
    "Checkpoint",
    "CheckpointManifest",
    "EncoderSpec",
    "MlpSpec",
    "Params",
    "TAP_NAMES",
    "TapName",
    "Taps",
    "TeacherState",
    "TrunkSpec",
    "assert_detached",
    "assert_untracked",
    "center_update",
    "ema_schedule",
    "ema_update",
    "encode",
    "encode_backbone",
    "init_encoder",
    "init_mlp",
    "load_checkpoint",
    "mlp_forward",
    "save_checkpoint",
    "spec_hash",
    "stop_gradient",
    "teacher_from_student",
]

from sslforge.tensor import stop_gradient

from .checkpoint import (
    Checkpoint,
    CheckpointManifest,
    load_checkpoint,
    save_checkpoint,
    spec_hash,
)
from .encoder import (
    TAP_NAMES,
    EncoderSpec,
    TapName,
    Taps,
    TrunkSpec,
    encode,
    encode_backbone,
    init_encoder,
)
from .mlp import MlpSpec, Params, init_mlp, mlp_forward
from .teacher import (
    TeacherState,
    assert_detached,
    assert_untracked,
    center_update,
    ema_schedule,
    ema_update,
    teacher_from_student,
)
