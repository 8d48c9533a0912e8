"""Offline evaluation of a frozen encoder at every tap."""

from __future__ import annotations

import logging
from pathlib import Path

from sslforge.core.base import ForgeModel
from sslforge.eval import knn_classify, linear_probe, mlp_probe, spectrum_report
from sslforge.nets import Params, TapName, init_encoder, load_checkpoint
from sslforge.utils import write_to_path

from .config import ExperimentConfig
from .datasets import Splits, load_splits
from .embeddings import dump_taps

logger = logging.getLogger(__name__)

EVAL_DIR = "eval"
REPORT_NAME = "eval_report.json"


class ProbeSummary(ForgeModel):
    final_accuracy: float
    best_accuracy: float
    best_epoch: int


class TapReport(ForgeModel):
    tap: TapName
    dim: int
    knn_accuracy: float
    linear_probe: ProbeSummary
    mlp_probe: ProbeSummary
    rankme: float
    alpha: float | None
    numeric_rank: int


class EvalReport(ForgeModel):
    checkpoint: str | None
    """None for a randomly initialized encoder."""
    step: int
    seed: int
    num_classes: int
    chance: float
    taps: list[TapReport]

    def tap(self, name: TapName) -> TapReport | None:
        return next((report for report in self.taps if report.tap == name), None)


def _load_params(config: ExperimentConfig, checkpoint: Path | None) -> tuple[Params, int]:
    spec = config.encoder_spec()
    if checkpoint is None:
        logger.info(f"Evaluating a random encoder (seed {config.seed})")
        return init_encoder(spec, config.seed), 0
    loaded = load_checkpoint(checkpoint, spec)
    return loaded.student, loaded.manifest.step


def run_eval(
    config: ExperimentConfig,
    checkpoint: Path | None,
    splits: Splits | None = None,
    output_dir: Path | None = None,
) -> EvalReport:
    """kNN, linear and MLP probes and spectrum diagnostics per tap, on embeddings of
    the unaugmented train and val splits. Writes the dumps and `eval_report.json`."""
    splits = splits or load_splits(config)
    out_dir = output_dir or config.output_dir / EVAL_DIR
    params, step = _load_params(config, checkpoint)

    dumps = dump_taps(
        out_dir / "embeddings",
        config.encoder_spec(),
        params,
        {"train": splits.train, "val": splits.val},
        config.eval.taps,
        step=step,
        seed=config.seed,
    )

    num_classes = splits.num_classes
    taps: list[TapReport] = []
    for tap in config.eval.taps:
        if ("train", tap) not in dumps:
            logger.info(f"Model has no {tap} tap, skipping")
            continue
        train, val = dumps["train", tap], dumps["val", tap]

        knn = knn_classify(
            train.values,
            splits.train.labels,
            val.values,
            splits.val.labels,
            k=min(config.eval.knn_k, len(splits.train)),
            temperature=config.eval.knn_temperature,
            num_classes=num_classes,
        )
        linear = linear_probe(
            train.values,
            splits.train.labels,
            val.values,
            splits.val.labels,
            config.eval.probe,
            num_classes=num_classes,
        )
        mlp = mlp_probe(
            train.values,
            splits.train.labels,
            val.values,
            splits.val.labels,
            config.eval.probe,
            num_classes=num_classes,
        )
        spectrum = spectrum_report(train.values)

        assert knn.accuracy is not None
        report = TapReport(
            tap=tap,
            dim=train.values.shape[1],
            knn_accuracy=knn.accuracy,
            linear_probe=ProbeSummary(
                final_accuracy=linear.final_accuracy,
                best_accuracy=linear.best_accuracy,
                best_epoch=linear.best_epoch,
            ),
            mlp_probe=ProbeSummary(
                final_accuracy=mlp.final_accuracy,
                best_accuracy=mlp.best_accuracy,
                best_epoch=mlp.best_epoch,
            ),
            rankme=spectrum.rankme,
            alpha=spectrum.alpha,
            numeric_rank=spectrum.numeric_rank,
        )
        logger.info(
            f"{tap}: kNN {report.knn_accuracy:.4f}, linear "
            f"{report.linear_probe.final_accuracy:.4f}, MLP "
            f"{report.mlp_probe.final_accuracy:.4f}, RankMe {report.rankme:.3f}"
        )
        taps.append(report)

    report = EvalReport(
        checkpoint=None if checkpoint is None else str(checkpoint),
        step=step,
        seed=config.seed,
        num_classes=num_classes,
        chance=1 / num_classes,
        taps=taps,
    )
    write_to_path(out_dir / REPORT_NAME, report.model_dump_json(indent=2))
    return report
