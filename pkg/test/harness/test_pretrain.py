import dataclasses
import math
from pathlib import Path
from typing import Any

import numpy as np
import pytest
from pytest import MonkeyPatch
from sslforge.errors import ContractError, NumericalAbort
from sslforge.harness import (
    METRICS_COLUMNS,
    PRESET_NAMES,
    ExperimentConfig,
    Pretrainer,
    Splits,
    read_metrics,
    run_pretrain,
)
from sslforge.harness.batches import ViewBatch
from sslforge.harness.config import RESOLVED_CONFIG_NAME
from sslforge.harness.pretrain import StepOutput, TrainState
from sslforge.nets import TeacherState, load_checkpoint

from ..conftest import list_directory, merged

# per-preset tweaks that fit the tiny model
PRESET_FIXUPS: dict[str, dict[str, Any]] = {
    "byol": {"model": {"predictor": [8, 8]}},
    "simsiam": {"model": {"predictor": [4, 8]}},
    "dino": {"augment": {"multicrop": {"n_local": 2, "local_size": 8}}},
    "nnclr": {"method": {"loss": {"kind": "nnclr", "queue_size": 16}}},
}


def preset_config(tiny_raw: dict[str, Any], preset: str, **sections: dict[str, Any]):
    raw = merged(tiny_raw, method={"preset": preset})
    for name, values in PRESET_FIXUPS.get(preset, {}).items():
        raw = merged(raw, **{name: values})
    raw = merged(raw, **sections)
    return ExperimentConfig.from_raw(raw)


def without_timing(path: Path) -> list[list[str]]:
    wall = METRICS_COLUMNS.index("wall_time")
    rows = [line.split(",") for line in path.read_text("utf-8").splitlines()]
    return [row[:wall] + row[wall + 1 :] for row in rows]


def test_run_directory(tiny_config: ExperimentConfig, tiny_splits: Splits):
    result = run_pretrain(tiny_config, tiny_splits)

    files = list_directory(result.output_dir)
    assert RESOLVED_CONFIG_NAME in files
    assert "metrics.csv" in files
    assert "checkpoint/manifest.json" in files
    assert "embeddings/train_backbone.sslt" in files
    assert "embeddings/val_projector.sslt" in files

    # 36 training images at batch 8, logged every step
    records = read_metrics(result.metrics)
    assert [record.step for record in records] == [1, 2, 3, 4]
    assert records[-1].rankme_backbone is not None
    assert records[0].rankme_backbone is None
    assert all(record.online_probe_acc is not None for record in records)

    checkpoint = load_checkpoint(result.checkpoint, tiny_config.encoder_spec())
    assert checkpoint.manifest.step == 4
    for name, value in result.params.items():
        np.testing.assert_array_equal(checkpoint.student[name].data, value.data)


def test_reruns_are_identical(tiny_config: ExperimentConfig, tiny_splits: Splits, tmp_path: Path):
    a = tiny_config.with_override("run.output_dir", str(tmp_path / "a"))
    b = tiny_config.with_override("run.output_dir", str(tmp_path / "b"))

    first = run_pretrain(a, tiny_splits)
    second = run_pretrain(b.with_override("run.prefetch", 3), tiny_splits)

    assert without_timing(first.metrics) == without_timing(second.metrics)
    assert first.rankme == second.rankme


@pytest.mark.parametrize("preset", PRESET_NAMES)
def test_every_preset_trains(tiny_raw: dict[str, Any], tiny_splits: Splits, preset: str):
    config = preset_config(tiny_raw, preset)

    result = run_pretrain(config, tiny_splits)

    losses = [record.loss for record in result.records]
    assert len(losses) == 4
    assert all(math.isfinite(loss) for loss in losses)
    assert (result.teacher is not None) == config.method.loss.uses_teacher


@pytest.mark.parametrize("preset", ["simclr", "vicreg", "byol", "mae-toy", "nnclr"])
def test_virtual_world(tiny_raw: dict[str, Any], tiny_splits: Splits, preset: str):
    config = preset_config(
        tiny_raw,
        preset,
        distributed={"world_size": 2, "per_device_batch": 4},
    )

    result = run_pretrain(config, tiny_splits)

    assert [record.step for record in result.records] == [1, 2, 3, 4]
    assert all(math.isfinite(record.loss) for record in result.records)


def test_virtual_world_matches_single_device_for_per_sample_loss(
    tiny_raw: dict[str, Any], tiny_splits: Splits
):
    # no batch norm and a per-sample loss: splitting the batch changes nothing
    single = preset_config(tiny_raw, "mae-toy")
    split = single.with_override("distributed", {"world_size": 2, "per_device_batch": 4})

    a = Pretrainer(single, tiny_splits)
    b = Pretrainer(split, tiny_splits)
    batch = next(iter(a.batches(0)))
    out_a = a.compute(a.init_state(), batch)
    out_b = b.compute(b.init_state(), batch)

    assert out_b.loss == pytest.approx(out_a.loss, rel=1e-9)
    for name, grad in out_a.grads.items():
        np.testing.assert_allclose(out_b.grads[name], grad, rtol=1e-7, atol=1e-12)


def test_ema_moves_teacher(tiny_raw: dict[str, Any], tiny_splits: Splits):
    config = preset_config(tiny_raw, "byol")
    trainer = Pretrainer(config, tiny_splits)
    state = trainer.init_state()
    assert state.teacher is not None
    before = {name: value.copy() for name, value in state.teacher.params.items()}

    state, _ = trainer.train(state)

    assert state.teacher is not None
    moved = [
        not np.array_equal(before[name], value) for name, value in state.teacher.params.items()
    ]
    assert any(moved)


def test_teacher_aliasing_student_is_caught(tiny_raw: dict[str, Any], tiny_splits: Splits):
    trainer = Pretrainer(preset_config(tiny_raw, "byol"), tiny_splits)
    state = trainer.init_state()
    assert state.teacher is not None
    state.teacher = TeacherState(
        {name: state.params[name].data for name in state.teacher.params},
        xi=0.99,
    )
    batch = next(iter(trainer.batches(0)))

    with pytest.raises(ContractError, match="shares memory"):
        trainer.step(state, batch)


def test_teacher_aliasing_allowed_without_leak_check(
    tiny_raw: dict[str, Any], tiny_splits: Splits
):
    config = preset_config(tiny_raw, "byol", ema={"leak_check": False})
    trainer = Pretrainer(config, tiny_splits)
    state = trainer.init_state()
    assert state.teacher is not None
    state.teacher = TeacherState(
        {name: state.params[name].data for name in state.teacher.params},
        xi=0.99,
    )

    state, _ = trainer.step(state, next(iter(trainer.batches(0))))

    assert state.step == 1


def test_non_finite_loss_aborts(
    tiny_config: ExperimentConfig, tiny_splits: Splits, monkeypatch: MonkeyPatch
):
    compute = Pretrainer.compute

    def poisoned(self: Pretrainer, state: TrainState, batch: ViewBatch) -> StepOutput:
        out = compute(self, state, batch)
        if state.step == 2:
            return dataclasses.replace(out, loss=float("nan"))
        return out

    monkeypatch.setattr(Pretrainer, "compute", poisoned)

    with pytest.raises(NumericalAbort) as excinfo:
        run_pretrain(tiny_config, tiny_splits)

    assert excinfo.value.step == 3
    assert math.isnan(excinfo.value.terms["loss"])
    records = read_metrics(tiny_config.output_dir / "metrics.csv")
    assert [record.step for record in records] == [1, 2]
