"""Checkpoint directories: one tensor dump per parameter plus a JSON manifest."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from pydantic import BaseModel

from sslforge.core.base import ForgeModel
from sslforge.errors import DataError, SpecError
from sslforge.tensor import Tensor, read_tensor, write_tensor
from sslforge.utils import write_to_path

from .teacher import TeacherState

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class CheckpointManifest(ForgeModel):
    spec_hash: str
    step: int
    seed: int
    student: list[str]
    teacher: list[str]
    xi: float | None = None
    has_center: bool = False


@dataclass(frozen=True)
class Checkpoint:
    manifest: CheckpointManifest
    student: dict[str, Tensor]
    teacher: TeacherState | None


def spec_hash(spec: BaseModel) -> str:
    return hashlib.sha256(spec.model_dump_json().encode()).hexdigest()


def save_checkpoint(
    path: Path,
    spec: BaseModel,
    student: Mapping[str, Tensor],
    teacher: TeacherState | None = None,
    *,
    step: int,
    seed: int,
):
    for name, value in student.items():
        write_tensor(path / "student" / f"{name}.sslt", value)

    teacher_names: list[str] = []
    if teacher is not None:
        for name, value in teacher.params.items():
            write_tensor(path / "teacher" / f"{name}.sslt", value)
            teacher_names.append(name)
        if teacher.center is not None:
            write_tensor(path / "center.sslt", teacher.center)

    manifest = CheckpointManifest(
        spec_hash=spec_hash(spec),
        step=step,
        seed=seed,
        student=list(student),
        teacher=teacher_names,
        xi=teacher.xi if teacher else None,
        has_center=teacher is not None and teacher.center is not None,
    )
    write_to_path(path / MANIFEST_NAME, manifest.model_dump_json(indent=2))
    logger.info(f"Saved checkpoint at step {step} to {path}")


def load_checkpoint(path: Path, spec: BaseModel | None = None) -> Checkpoint:
    """Loads a checkpoint; with `spec`, also checks it was trained with that spec."""
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DataError(f"No checkpoint manifest at {manifest_path}")
    manifest = CheckpointManifest.model_validate_json(manifest_path.read_text("utf-8"))

    if spec is not None and manifest.spec_hash != spec_hash(spec):
        raise SpecError(f"Checkpoint {path} was saved with a different model spec")

    student = {
        name: Tensor(read_tensor(path / "student" / f"{name}.sslt"), requires_grad=True)
        for name in manifest.student
    }

    teacher = None
    if manifest.xi is not None:
        center = read_tensor(path / "center.sslt") if manifest.has_center else None
        teacher = TeacherState(
            {
                name: np.array(read_tensor(path / "teacher" / f"{name}.sslt"))
                for name in manifest.teacher
            },
            manifest.xi,
            center,
        )

    logger.debug(f"Loaded checkpoint {path} (step {manifest.step})")
    return Checkpoint(manifest, student, teacher)
