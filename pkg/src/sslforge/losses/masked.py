from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from sslforge.errors import DimensionError
from sslforge.tensor import Tensor

from .output import LossOutput


def masked_recon_loss(pred: Tensor, original: ArrayLike, mask: ArrayLike) -> LossOutput:
    """Mean squared error over masked entries only; zero when nothing is masked."""
    original = np.asarray(original, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != original.shape or mask.shape != pred.shape:
        raise DimensionError("masked_recon_loss", pred.shape, original.shape, mask.shape)

    count = int(mask.sum())
    diff = (pred - original) * mask
    recon = (diff * diff).sum() / max(count, 1)
    return LossOutput(recon, {"recon": recon.item()})
