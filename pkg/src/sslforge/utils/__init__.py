__all__ = [
    "TOMLDict",
    "TOMLValue",
    "TRACE",
    "cast_or_raise",
    "isinstance_or_raise",
    "listify",
    "load_toml_with_placeholders",
    "setup_logging",
    "unique_stem",
    "write_to_path",
]

from .deserialize import (
    TOMLDict,
    TOMLValue,
    cast_or_raise,
    isinstance_or_raise,
    load_toml_with_placeholders,
)
from .iterators import listify
from .logging import TRACE, setup_logging
from .path import unique_stem, write_to_path
