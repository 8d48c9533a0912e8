from __future__ import annotations

from typing import Any, dataclass_transform

from pydantic import BaseModel, ConfigDict, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from sslforge import SSLFORGE_ENV_PREFIX

DEFAULT_CONFIG = ConfigDict(
    extra="forbid",
    validate_default=True,
)


@dataclass_transform()
class ForgeModel(BaseModel):
    """Base class for all Pydantic models in sslforge.

    Unknown keys are rejected and defaults are validated, so a config that loads is
    a config that was checked in full.
    """

    model_config = DEFAULT_CONFIG


@dataclass_transform()
class FrozenForgeModel(ForgeModel):
    """Immutable, hashable variant for specs that key caches or registries."""

    model_config = DEFAULT_CONFIG | ConfigDict(frozen=True)


@dataclass_transform()
class StripHiddenModel(ForgeModel):
    """Drops every key starting with `_` before validation.

    Config files use such keys as local variables for placeholders, eg.
    `_root = "runs"` and `output_dir = "{_root}/simclr"`.
    """

    @model_validator(mode="before")
    def _pre_root_strip_hidden(cls, values: dict[Any, Any] | Any) -> Any:
        if not isinstance(values, dict):
            return values

        return {
            key: value
            for key, value in values.items()
            if not (isinstance(key, str) and key.startswith("_"))
        }


class ForgeSettings(BaseSettings):
    """Environment overrides, read from `SSLFORGE_*` variables or a `.env` file."""

    model_config = SettingsConfigDict(
        env_prefix=SSLFORGE_ENV_PREFIX,
        env_file=".env",
        extra="ignore",
    )

    seed: int | None = None

    @classmethod
    def model_getenv(cls, defaults: Any = None):
        return cls.model_validate(defaults or {})
