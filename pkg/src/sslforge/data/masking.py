from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from sslforge.errors import ParameterError

from .synthetic import Image


@dataclass(frozen=True)
class MaskedImage:
    image: Image
    """The input with every masked patch zeroed."""
    mask: NDArray[np.bool_]
    """(rows, cols) patch grid, True where masked."""
    ratio: float
    patch: int

    @property
    def pixel_mask(self) -> NDArray[np.bool_]:
        """(H, W) boolean mask of the pixels under masked patches."""
        return patch_to_pixel_mask(self.mask, self.patch)


def patch_to_pixel_mask(mask: NDArray[np.bool_], patch: int) -> NDArray[np.bool_]:
    return np.repeat(np.repeat(mask, patch, axis=0), patch, axis=1)


def mask_patches(
    img: Image,
    patch: int,
    ratio: float,
    rng: np.random.Generator,
) -> MaskedImage:
    """Zeroes a uniformly random subset of round(ratio · patches) patches."""
    height, width = img.shape[:2]
    if patch < 1 or height % patch or width % patch:
        raise ParameterError(
            f"Patch size {patch} does not divide the {height}x{width} image"
        )
    if not 0 < ratio < 1:
        raise ParameterError(f"Mask ratio must be in (0, 1), got {ratio}")

    rows, cols = height // patch, width // patch
    total = rows * cols
    count = int(np.floor(ratio * total + 0.5))

    mask = np.zeros(total, dtype=bool)
    mask[rng.permutation(total)[:count]] = True
    mask = mask.reshape(rows, cols)

    image = np.array(img, dtype=np.float64)
    image[patch_to_pixel_mask(mask, patch)] = 0.0
    return MaskedImage(image, mask, ratio, patch)
