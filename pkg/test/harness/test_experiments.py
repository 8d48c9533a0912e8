"""Desk-scale reproductions of the qualitative claims; run with `nox -s experiments`."""

from pathlib import Path
from typing import Any

import pytest
from sslforge.harness import (
    ExperimentConfig,
    load_splits,
    run_collapse_experiment,
    run_eval,
    run_hparam_sweep,
    run_pretrain,
)

pytestmark = pytest.mark.experiment


def shapes_raw(tmp_path: Path, **sections: dict[str, Any]) -> dict[str, Any]:
    raw: dict[str, Any] = {
        "run": {"output_dir": str(tmp_path), "eval_every": 5, "log_every": 20},
        "dataset": {"n": 512, "classes": 4, "size": 32},
        "distributed": {"per_device_batch": 64},
    }
    for name, values in sections.items():
        raw[name] = raw.get(name, {}) | values
    return raw


def test_invariance_only_collapses(tmp_path: Path):
    config = ExperimentConfig.from_raw(
        shapes_raw(
            tmp_path,
            run={"epochs": 5},
            method={"preset": "vicreg"},
        )
    )

    result = run_collapse_experiment(config)

    assert result.invariance is not None and result.vicreg is not None
    assert result.invariance <= 1.5
    assert result.vicreg >= 0.5 * result.dim


def test_simclr_beats_random_encoder(tmp_path: Path):
    config = ExperimentConfig.from_raw(
        shapes_raw(
            tmp_path,
            run={"epochs": 30},
            method={"preset": "simclr"},
        )
    )
    splits = load_splits(config)

    trained = run_pretrain(config, splits)
    learned = run_eval(config, trained.checkpoint, splits).tap("backbone")
    control = run_eval(config, None, splits, output_dir=tmp_path / "control").tap("backbone")

    assert learned is not None and control is not None
    assert control.linear_probe.final_accuracy > 1 / splits.num_classes
    assert learned.knn_accuracy - control.knn_accuracy >= 0.15
    assert learned.linear_probe.final_accuracy - control.linear_probe.final_accuracy >= 0.10


def test_byol_needs_its_predictor(tmp_path: Path):
    config = ExperimentConfig.from_raw(
        shapes_raw(
            tmp_path,
            run={"epochs": 10, "output_dir": str(tmp_path / "with")},
            method={"preset": "byol"},
        )
    )
    splits = load_splits(config)
    ablated = config.with_override("model.predictor", False).with_override(
        "run.output_dir", str(tmp_path / "without")
    )

    with_predictor = run_pretrain(config, splits).rankme["projector"]
    without_predictor = run_pretrain(ablated, splits).rankme["projector"]

    dim = config.encoder_spec().projector_dim
    assert with_predictor is not None and with_predictor >= 0.3 * dim
    assert without_predictor is not None and without_predictor <= 2


def test_rankme_tracks_probe_accuracy_over_tau(tmp_path: Path):
    config = ExperimentConfig.from_raw(
        shapes_raw(
            tmp_path,
            run={"epochs": 5},
            method={"preset": "simclr"},
            sweep={"parameter": "method.loss.tau", "values": [0.05, 0.1, 0.2, 0.5, 1.0]},
        )
    )

    result = run_hparam_sweep(config)

    assert result.spearman is not None, result.reason
    assert result.spearman > 0
