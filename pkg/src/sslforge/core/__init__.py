__all__ = [
    "DEFAULT_CONFIG",
    "ForgeModel",
    "ForgeSettings",
    "FrozenForgeModel",
    "StripHiddenModel",
]

from .base import (
    DEFAULT_CONFIG,
    ForgeModel,
    ForgeSettings,
    FrozenForgeModel,
    StripHiddenModel,
)
