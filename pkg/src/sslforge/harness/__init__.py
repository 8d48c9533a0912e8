"""Experiment orchestration: configs and presets, the pretraining loop, offline
evaluation, sweeps, the collapse experiment and metrics files."""

__all__ = [
    "CollapseResult",
    "EvalReport",
    "ExperimentConfig",
    "METRICS_COLUMNS",
    "MetricsRecord",
    "PRESETS",
    "PRESET_NAMES",
    "PlotPoint",
    "PretrainResult",
    "Pretrainer",
    "Splits",
    "SweepResult",
    "TapReport",
    "emit_plot_data",
    "expand_preset",
    "load_splits",
    "read_metrics",
    "read_plot_data",
    "run_collapse_experiment",
    "run_eval",
    "run_hparam_sweep",
    "run_pretrain",
    "write_metrics",
]

from .collapse import CollapseResult, run_collapse_experiment
from .config import ExperimentConfig
from .datasets import Splits, load_splits
from .evaluate import EvalReport, TapReport, run_eval
from .metrics import (
    METRICS_COLUMNS,
    MetricsRecord,
    PlotPoint,
    emit_plot_data,
    read_metrics,
    read_plot_data,
    write_metrics,
)
from .presets import PRESET_NAMES, PRESETS, expand_preset
from .pretrain import Pretrainer, PretrainResult, run_pretrain
from .sweep import SweepResult, run_hparam_sweep
