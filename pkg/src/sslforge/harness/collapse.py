"""The paired collapse experiment: invariance only, then with variance and covariance."""

from __future__ import annotations

import logging
from typing import Any

from sslforge.core.base import ForgeModel
from sslforge.nets import TapName
from sslforge.utils import write_to_path

from .config import ExperimentConfig
from .datasets import Splits, load_splits
from .pretrain import run_pretrain

logger = logging.getLogger(__name__)

COLLAPSE_DIR = "collapse"
COLLAPSE_JSON = "collapse.json"

VARIANTS: dict[str, dict[str, Any]] = {
    "invariance": {"kind": "invariance"},
    "vicreg": {"kind": "vicreg"},
}


class CollapseResult(ForgeModel):
    tap: TapName
    dim: int
    rankme: dict[str, float | None]
    """RankMe at `tap` after training, per variant."""

    @property
    def invariance(self) -> float | None:
        return self.rankme["invariance"]

    @property
    def vicreg(self) -> float | None:
        return self.rankme["vicreg"]


def run_collapse_experiment(
    config: ExperimentConfig,
    splits: Splits | None = None,
    tap: TapName = "projector",
) -> CollapseResult:
    """Trains both variants from the same seed and data; only the loss differs."""
    splits = splits or load_splits(config)
    out_dir = config.output_dir / COLLAPSE_DIR

    ranks: dict[str, float | None] = {}
    for name, loss in VARIANTS.items():
        variant = config.with_override("method.loss", loss)
        variant = variant.with_override("method.preset", None)
        variant = variant.with_override("run.output_dir", str(out_dir / name))
        result = run_pretrain(variant, splits)
        ranks[name] = result.rankme[tap]
        logger.info(f"Collapse experiment, {name}: {tap} RankMe {ranks[name]}")

    dim = config.encoder_spec().tap_dim(tap) or 0
    result = CollapseResult(tap=tap, dim=dim, rankme=ranks)
    write_to_path(out_dir / COLLAPSE_JSON, result.model_dump_json(indent=2))
    return result
