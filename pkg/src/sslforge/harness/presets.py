"""Named method recipes, expanded into config section defaults before validation."""

from __future__ import annotations

import copy
import logging
from typing import Any, Literal, get_args

from sslforge.errors import ConfigError

logger = logging.getLogger(__name__)

PresetName = Literal[
    "simclr",
    "byol",
    "simsiam",
    "dino",
    "vicreg",
    "barlow",
    "mae-toy",
    "nnclr",
    "invariance",
    "generalized",
]
PRESET_NAMES: tuple[PresetName, ...] = get_args(PresetName)

_NO_PREDICTOR: dict[str, Any] = {"predictor": False}

PRESETS: dict[PresetName, dict[str, Any]] = {
    "simclr": {
        "method": {"loss": {"kind": "nt_xent", "tau": 0.5}},
        "model": _NO_PREDICTOR,
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "byol": {
        "method": {"loss": {"kind": "byol"}},
        "model": {"predictor": [64, 64], "projector_batch_norm": True},
        "ema": {"xi_start": 0.99, "schedule": "cosine"},
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "simsiam": {
        "method": {"loss": {"kind": "simsiam"}},
        "model": {"predictor": [32, 64], "projector_batch_norm": True},
        "optim": {"kind": "sgd", "base_lr": 0.05, "momentum": 0.9, "weight_decay": 1e-4},
    },
    "dino": {
        "method": {"loss": {"kind": "dino", "tau_s": 0.1, "tau_t": 0.04}},
        "model": _NO_PREDICTOR | {"projector": [128, 64]},
        "augment": {"multicrop": {"n_local": 2, "local_size": 16}},
        "ema": {"xi_start": 0.996, "schedule": "cosine"},
        "optim": {"kind": "adam", "base_lr": 5e-4},
    },
    "vicreg": {
        "method": {"loss": {"kind": "vicreg"}},
        "model": _NO_PREDICTOR | {"projector": [128, 128], "projector_batch_norm": True},
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "barlow": {
        "method": {"loss": {"kind": "barlow", "lambda_offdiag": 5e-3}},
        "model": _NO_PREDICTOR | {"projector": [128, 128], "projector_batch_norm": True},
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "mae-toy": {
        "method": {"loss": {"kind": "masked_recon", "patch": 8, "ratio": 0.75}},
        "model": _NO_PREDICTOR,
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "nnclr": {
        "method": {"loss": {"kind": "nnclr", "tau": 0.1, "queue_size": 512}},
        "model": _NO_PREDICTOR,
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "invariance": {
        "method": {"loss": {"kind": "invariance"}},
        "model": _NO_PREDICTOR,
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
    "generalized": {
        "method": {"loss": {"kind": "generalized", "row": "infonce", "tau": 0.5}},
        "model": _NO_PREDICTOR,
        "optim": {"kind": "adam", "base_lr": 1e-3},
    },
}


def merge_defaults(defaults: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Deep merge where `overrides` wins.

    A loss table naming a different `kind` replaces the default loss outright, since
    the fields of one loss mean nothing to another.
    """
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        current = merged.get(key)
        match current, value:
            case {"kind": old_kind}, {"kind": new_kind} if old_kind != new_kind:
                merged[key] = copy.deepcopy(value)
            case dict(), dict():
                merged[key] = merge_defaults(current, value)
            case _:
                merged[key] = copy.deepcopy(value)
    return merged


def expand_preset(raw: dict[str, Any]) -> dict[str, Any]:
    """Fills in the defaults of `method.preset`, if any; user keys win."""
    method = raw.get("method")
    if not isinstance(method, dict) or (name := method.get("preset")) is None:
        return raw
    if name not in PRESETS:
        raise ConfigError(
            f"Unknown method preset {name!r}, expected one of {', '.join(PRESET_NAMES)}"
        )

    logger.debug(f"Expanding method preset {name!r}")
    return merge_defaults(PRESETS[name], raw)
