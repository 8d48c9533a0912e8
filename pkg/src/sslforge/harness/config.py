"""Experiment configs: TOML (or echoed JSON) files validated in full before any compute."""

from __future__ import annotations

import json
import logging
import tomllib
from pathlib import Path
from typing import Annotated, Any, Literal, Self

from pydantic import Field, ValidationError, model_validator

from sslforge.core.base import ForgeSettings, StripHiddenModel
from sslforge.data import AugOp, AugPolicy, MultiCropSpec
from sslforge.errors import ConfigError
from sslforge.eval import DEFAULT_K, DEFAULT_TEMPERATURE, ProbeConfig
from sslforge.losses import LossSpec
from sslforge.losses.spec import NtXentSpec
from sslforge.nets import TAP_NAMES, EncoderSpec, TapName, TrunkSpec
from sslforge.nets.teacher import EmaScope
from sslforge.optim import EmaScheduleKind, LrScaling, OptimizerKind
from sslforge.utils import TRACE, load_toml_with_placeholders, write_to_path

from .presets import PresetName, expand_preset

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = "resolved_config.json"

# derived from dataset.size, so dumps leave it out
_DERIVED_KEYS: dict[str, Any] = {"model": {"trunk": {"image_size"}}}

_Positive = Annotated[int, Field(ge=1)]
_NonNegative = Annotated[int, Field(ge=0)]
_Width = Annotated[int, Field(gt=0)]


class RunSection(StripHiddenModel):
    name: str = "run"
    seed: int = 0
    epochs: _NonNegative = 5
    output_dir: Path = Path("runs")
    log_every: _Positive = 10
    """Steps between loss/lr log lines and metrics rows."""
    eval_every: _Positive = 1
    """Epochs between RankMe evaluations on the fixed eval subset."""
    prefetch: _NonNegative = 2
    """Batches prepared ahead on the worker thread; 0 builds them inline."""
    eval_samples: _Positive = 256
    dump_embeddings: bool = True


class DatasetSection(StripHiddenModel):
    kind: Literal["synthetic", "file"] = "synthetic"
    n: _Positive = 512
    classes: Annotated[int, Field(ge=2, le=8)] = 4
    size: Annotated[int, Field(ge=16)] = 32
    seed: int = 0
    path: Path | None = None
    val_fraction: Annotated[float, Field(gt=0, lt=1)] = 0.2

    @model_validator(mode="after")
    def _check_path(self):
        if self.kind == "file" and self.path is None:
            raise ValueError("dataset.path is required when dataset.kind is 'file'")
        return self


class MethodSection(StripHiddenModel):
    preset: PresetName | None = None
    loss: LossSpec = Field(default_factory=NtXentSpec)


class ModelSection(StripHiddenModel):
    trunk: TrunkSpec = TrunkSpec()
    projector: tuple[_Width, ...] = (128, 64)
    projector_batch_norm: bool = False
    predictor: tuple[_Width, ...] | Literal[False] = False
    """Predictor widths after the projector, or false for none."""


class AugmentSection(StripHiddenModel):
    ops: list[AugOp] = Field(default_factory=lambda: AugPolicy().ops)
    multicrop: MultiCropSpec = MultiCropSpec()

    def policy(self, size: int) -> AugPolicy:
        return AugPolicy(size=size, ops=self.ops)


class OptimSection(StripHiddenModel):
    kind: OptimizerKind = "adam"
    base_lr: Annotated[float, Field(ge=0)] = 1e-3
    lr_scaling: LrScaling = "none"
    """How the peak lr follows the effective batch (reference batch 256)."""
    warmup_epochs: _NonNegative = 0
    weight_decay: Annotated[float, Field(ge=0)] = 0.0
    momentum: Annotated[float, Field(ge=0, lt=1)] = 0.9
    exempt_bias_and_norm: bool = True


class EmaSection(StripHiddenModel):
    xi_start: Annotated[float, Field(ge=0, le=1)] = 0.996
    schedule: EmaScheduleKind = "cosine"
    scope: EmaScope = "all"
    leak_check: bool = True


class DistributedSection(StripHiddenModel):
    world_size: _Positive = 1
    per_device_batch: _Positive = 64

    @property
    def effective_batch(self) -> int:
        return self.world_size * self.per_device_batch


class EvalSection(StripHiddenModel):
    knn_k: _Positive = DEFAULT_K
    knn_temperature: Annotated[float, Field(gt=0)] = DEFAULT_TEMPERATURE
    probe: ProbeConfig = ProbeConfig()
    online_probe: bool = True
    online_lr: Annotated[float, Field(gt=0)] = 1e-3
    taps: tuple[TapName, ...] = TAP_NAMES


SweepValue = float | int | str | bool


class SweepSection(StripHiddenModel):
    parameter: str
    """Dotted config path, eg. `method.loss.tau`."""
    values: Annotated[list[SweepValue], Field(min_length=1)]
    epochs: _NonNegative | None = None
    """Overrides `run.epochs` for every cell."""
    tap: TapName = "backbone"
    """Tap whose RankMe and linear-probe accuracy are compared."""


class ExperimentConfig(StripHiddenModel):
    run: RunSection = RunSection()
    dataset: DatasetSection = DatasetSection()
    method: MethodSection = MethodSection()
    model: ModelSection = ModelSection()
    augment: AugmentSection = AugmentSection()
    optim: OptimSection = OptimSection()
    ema: EmaSection = EmaSection()
    distributed: DistributedSection = DistributedSection()
    eval: EvalSection = EvalSection()
    sweep: SweepSection | None = None

    @model_validator(mode="after")
    def _check_consistency(self):
        trunk = self.model.trunk
        if "image_size" in trunk.model_fields_set and trunk.image_size != self.dataset.size:
            raise ValueError(
                f"model.trunk.image_size ({trunk.image_size}) must match "
                f"dataset.size ({self.dataset.size})"
            )
        if self.model.predictor and self.method.loss.family == "teacher":
            projector_dim = self.model.projector[-1] if self.model.projector else trunk.backbone_dim
            if self.model.predictor[-1] != projector_dim:
                raise ValueError(
                    f"The predictor must end at the projector width ({projector_dim}), "
                    f"got model.predictor = {list(self.model.predictor)}"
                )
        multicrop = self.augment.multicrop
        if multicrop.n_local and trunk.kind != "conv":
            raise ValueError("Local crops need the conv trunk, which pools over any size")
        if multicrop.n_local and multicrop.local_size >= self.dataset.size:
            raise ValueError(
                f"augment.multicrop.local_size ({multicrop.local_size}) must be smaller "
                f"than dataset.size ({self.dataset.size})"
            )
        if self.method.loss.family == "masked":
            patch = getattr(self.method.loss, "patch")
            if self.dataset.size % patch:
                raise ValueError(
                    f"Mask patch {patch} does not divide dataset.size {self.dataset.size}"
                )
        if multicrop.n_local and self.method.loss.kind in ("generalized", "wu_nce", "masked_recon"):
            raise ValueError(
                f"Loss {self.method.loss.kind!r} takes exactly two views; "
                "set augment.multicrop.n_local = 0"
            )
        return self

    # loading

    @classmethod
    def load(cls, path: Path, *, seed: int | None = None) -> Self:
        """Reads a TOML or resolved JSON config.

        Precedence for the seed: the `seed` argument, then `SSLFORGE_SEED`, then the
        file.
        """
        try:
            match path.suffix:
                case ".json":
                    raw = json.loads(path.read_text("utf-8"))
                case _:
                    raw = load_toml_with_placeholders(path)
        except (OSError, KeyError, TypeError, ValueError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"Failed to read config {path}: {e}") from e
        return cls.from_raw(raw, seed=seed, source=str(path))

    @classmethod
    def from_raw(
        cls,
        raw: dict[str, Any],
        *,
        seed: int | None = None,
        source: str = "<config>",
    ) -> Self:
        raw = expand_preset(raw)

        if seed is None:
            seed = ForgeSettings.model_getenv().seed
        if seed is not None:
            logger.info(f"Seed override: {seed}")
            raw = raw | {"run": dict(raw.get("run", {})) | {"seed": seed}}

        try:
            config = cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"Invalid config {source}:\n{e}") from e

        logger.log(TRACE, config)
        return config

    def with_override(self, dotted: str, value: Any) -> Self:
        """Copy with one dotted key replaced, validated like a fresh load."""
        raw = self.model_dump(mode="json", exclude=_DERIVED_KEYS)
        *parents, leaf = dotted.split(".")
        table = raw
        for key in parents:
            child = table.get(key)
            if not isinstance(child, dict):
                raise ConfigError(f"No config table {key!r} in {dotted!r}")
            table = child
        if leaf not in table:
            raise ConfigError(f"No config key {dotted!r}")
        table[leaf] = value
        try:
            return self.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"Invalid value {value!r} for {dotted}:\n{e}") from e

    # derived values

    @property
    def output_dir(self) -> Path:
        return self.run.output_dir

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def uses_predictor(self) -> bool:
        return bool(self.model.predictor)

    def encoder_spec(self) -> EncoderSpec:
        trunk = self.model.trunk.model_copy(update={"image_size": self.dataset.size})
        return EncoderSpec(
            trunk=trunk,
            projector=self.model.projector,
            projector_batch_norm=self.model.projector_batch_norm,
            predictor=self.model.predictor or None,
            pixel_head=self.method.loss.family == "masked",
        )

    def augment_policy(self) -> AugPolicy:
        return self.augment.policy(self.dataset.size)

    def write_resolved(self, directory: Path | None = None) -> Path:
        path = (directory or self.output_dir) / RESOLVED_CONFIG_NAME
        write_to_path(path, self.model_dump_json(indent=2, exclude=_DERIVED_KEYS))
        return path
