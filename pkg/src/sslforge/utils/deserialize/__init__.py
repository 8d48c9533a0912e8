__all__ = [
    "TOMLDict",
    "TOMLValue",
    "cast_or_raise",
    "isinstance_or_raise",
    "load_toml_with_placeholders",
]

from .assertions import cast_or_raise, isinstance_or_raise
from .toml import TOMLDict, TOMLValue, load_toml_with_placeholders
