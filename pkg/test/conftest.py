import json
from pathlib import Path
from textwrap import dedent
from typing import Any

import pytest
from pytest import MonkeyPatch
from sslforge.harness import ExperimentConfig, Splits, load_splits

collect_ignore = [
    "noxfile.py",
]


# fixtures


@pytest.fixture(scope="session")
def monkeysession():
    with MonkeyPatch.context() as mp:
        yield mp


@pytest.fixture(autouse=True, scope="session")
def patch_env(monkeysession: MonkeyPatch):
    # a seed in the developer's shell would silently change every run below
    monkeysession.delenv("SSLFORGE_SEED", raising=False)


@pytest.fixture
def tiny_raw(tmp_path: Path) -> dict[str, Any]:
    """A run small enough to train in a second or two."""
    return {
        "run": {
            "name": "tiny",
            "epochs": 1,
            "output_dir": str(tmp_path / "run"),
            "log_every": 1,
            "eval_samples": 16,
            "prefetch": 0,
        },
        "dataset": {"n": 48, "classes": 2, "size": 16, "val_fraction": 0.25},
        "model": {
            "trunk": {"kind": "conv", "channels": [4, 8]},
            "projector": [16, 8],
        },
        "distributed": {"per_device_batch": 8},
        "eval": {"knn_k": 5, "probe": {"epochs": 5}, "online_lr": 1e-2},
    }


@pytest.fixture
def tiny_config(tiny_raw: dict[str, Any]) -> ExperimentConfig:
    return ExperimentConfig.from_raw(tiny_raw)


@pytest.fixture
def tiny_splits(tiny_config: ExperimentConfig) -> Splits:
    return load_splits(tiny_config)


# helpers


def list_directory(root: str | Path, glob: str = "**/*") -> list[str]:
    root = Path(root)
    return sorted(path.relative_to(root).as_posix() for path in root.glob(glob))


def merged(raw: dict[str, Any], **sections: dict[str, Any]) -> dict[str, Any]:
    """`raw` with the given sections updated one level deep."""
    return raw | {name: raw.get(name, {}) | values for name, values in sections.items()}


def write_file(path: Path, content: str | dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    match content:
        case str():
            path.write_text(dedent(content), "utf-8")
        case _:
            path.write_text(json.dumps(content, indent="  "), "utf-8")
    return path
