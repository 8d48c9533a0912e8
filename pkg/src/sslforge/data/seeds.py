"""Seed derivation: every image, batch and epoch gets its own independent substream."""

import numpy as np


def derive_seed(*keys: int) -> int:
    """A 32-bit seed fully determined by the key tuple."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1)
    return int(state[0])


def image_seed(global_seed: int, index: int, epoch: int = 0) -> int:
    return derive_seed(global_seed, epoch, index)


def substream(*keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))
