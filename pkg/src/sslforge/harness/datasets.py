from __future__ import annotations

import logging
from dataclasses import dataclass

from sslforge.data import LabeledImages, gen_synthetic_dataset, read_dataset
from sslforge.errors import DataError

from .config import DatasetSection, ExperimentConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Splits:
    train: LabeledImages
    val: LabeledImages

    @property
    def num_classes(self) -> int:
        return max(self.train.num_classes, self.val.num_classes)

    def eval_subset(self, count: int) -> LabeledImages:
        """The fixed, unaugmented rows used for in-training diagnostics."""
        return self.val.subset(range(min(count, len(self.val))))


def load_dataset(section: DatasetSection) -> LabeledImages:
    match section.kind:
        case "synthetic":
            return gen_synthetic_dataset(section.n, section.classes, section.size, section.seed)
        case "file":
            assert section.path is not None
            dataset = read_dataset(section.path)
            if dataset.size != section.size:
                raise DataError(
                    f"{section.path} holds {dataset.size}px images, "
                    f"but dataset.size is {section.size}"
                )
            return dataset


def load_splits(config: ExperimentConfig) -> Splits:
    train, val = load_dataset(config.dataset).split(config.dataset.val_fraction)
    logger.info(f"Dataset: {len(train)} train / {len(val)} val images")
    return Splits(train, val)
