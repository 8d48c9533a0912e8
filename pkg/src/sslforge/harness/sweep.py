"""Hyperparameter sweeps ranking cells by RankMe against probe accuracy."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np
import scipy.stats

from sslforge.core.base import ForgeModel
from sslforge.errors import ConfigError, DataError
from sslforge.eval import linear_probe, rankme
from sslforge.utils import write_to_path

from .config import ExperimentConfig, SweepValue
from .datasets import Splits, load_splits
from .embeddings import embed_taps
from .pretrain import run_pretrain

logger = logging.getLogger(__name__)

SWEEP_DIR = "sweep"
SWEEP_CSV = "sweep.csv"
SWEEP_JSON = "sweep.json"


class SweepCell(ForgeModel):
    value: SweepValue
    rankme: float | None
    probe_accuracy: float
    output_dir: str


class SweepResult(ForgeModel):
    parameter: str
    tap: str
    cells: list[SweepCell]
    spearman: float | None
    reason: str | None = None
    """Why `spearman` is undefined, if it is."""

    def table(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([self.parameter, "rankme", "probe_accuracy"])
        for cell in self.cells:
            writer.writerow(
                [cell.value, "" if cell.rankme is None else repr(cell.rankme), repr(cell.probe_accuracy)]
            )
        return buffer.getvalue()


def rank_correlation(x: list[float | None], y: list[float]) -> tuple[float | None, str | None]:
    """Spearman ρ, or None with the reason it is undefined."""
    pairs = [(a, b) for a, b in zip(x, y) if a is not None]
    if len(pairs) < 2:
        return None, f"needs at least two cells with a defined RankMe, got {len(pairs)}"
    a, b = map(np.asarray, zip(*pairs))
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return None, "RankMe or probe accuracy is constant across the grid"
    return float(scipy.stats.spearmanr(a, b).statistic), None


def run_hparam_sweep(config: ExperimentConfig, splits: Splits | None = None) -> SweepResult:
    """Trains one short run per grid value, then compares RankMe with linear-probe
    accuracy at the sweep tap. Writes `sweep.csv` and `sweep.json`."""
    if config.sweep is None:
        raise ConfigError("The config has no [sweep] section")
    sweep = config.sweep
    splits = splits or load_splits(config)
    out_dir = config.output_dir / SWEEP_DIR

    cells: list[SweepCell] = []
    for i, value in enumerate(sweep.values):
        cell_dir = out_dir / f"cell{i}"
        cell = config.with_override(sweep.parameter, value)
        cell = cell.with_override("run.output_dir", str(cell_dir))
        cell = cell.with_override("run.dump_embeddings", False)
        if sweep.epochs is not None:
            cell = cell.with_override("run.epochs", sweep.epochs)

        logger.info(f"Sweep cell {i}: {sweep.parameter} = {value!r}")
        result = run_pretrain(cell, splits)

        spec = cell.encoder_spec()
        train = embed_taps(spec, result.params, splits.train.images, [sweep.tap])
        val = embed_taps(spec, result.params, splits.val.images, [sweep.tap])
        if sweep.tap not in train:
            raise ConfigError(f"The model has no {sweep.tap} tap")

        try:
            rank = rankme(train[sweep.tap])
        except DataError as e:
            logger.warning(f"Cell {i}: RankMe undefined ({e})")
            rank = None
        probe = linear_probe(
            train[sweep.tap],
            splits.train.labels,
            val[sweep.tap],
            splits.val.labels,
            cell.eval.probe,
            num_classes=splits.num_classes,
        )
        cells.append(
            SweepCell(
                value=value,
                rankme=rank,
                probe_accuracy=probe.final_accuracy,
                output_dir=str(cell_dir),
            )
        )

    spearman, reason = rank_correlation(
        [cell.rankme for cell in cells], [cell.probe_accuracy for cell in cells]
    )
    result = SweepResult(
        parameter=sweep.parameter,
        tap=sweep.tap,
        cells=cells,
        spearman=spearman,
        reason=reason,
    )
    write_sweep(out_dir, result)

    if spearman is None:
        logger.info(f"Spearman correlation undefined: {reason}")
    else:
        logger.info(f"Spearman correlation of RankMe and probe accuracy: {spearman:.3f}")
    return result


def write_sweep(directory: Path, result: SweepResult):
    write_to_path(directory / SWEEP_CSV, result.table())
    write_to_path(directory / SWEEP_JSON, result.model_dump_json(indent=2))
