"""TOML loading with `{placeholder}` interpolation between string values.

Placeholders name another key: `{key}` looks in the current table, `{section.key}`
walks down from the current table, and each leading `^` climbs one table up, so
`{^run.name}` inside `[dataset]` reads `run.name`. Referenced values must be strings
(after their own placeholders are filled). `{{` and `}}` escape literal braces.
"""

import datetime
import re
import tomllib
from pathlib import Path

from .assertions import cast_or_raise

TOMLDict = dict[str, "TOMLValue"]

TOMLValue = (
    str
    | int
    | float
    | bool
    | datetime.datetime
    | datetime.date
    | datetime.time
    | list["TOMLValue"]
    | TOMLDict
)

_PLACEHOLDER_RE = re.compile(r"(?<!\{)\{([^{}]+)\}(?!\})")


def load_toml_with_placeholders(path: Path) -> TOMLDict:
    data = tomllib.loads(path.read_text("utf-8"))
    fill_placeholders(data)
    return data


def fill_placeholders(data: TOMLDict):
    _Filler(data).fill_table([data])


class _Filler:
    def __init__(self, root: TOMLDict):
        self.root = root
        self.done = set[tuple[int, str | int]]()
        self.in_progress = set[tuple[int, str | int]]()

    def fill_table(self, stack: list[TOMLDict]):
        table = stack[-1]
        for key in list(table):
            self.fill_value(stack, table, key)

    def fill_value(self, stack: list[TOMLDict], container: TOMLDict | list[TOMLValue], key: str | int):
        marker = (id(container), key)
        if marker in self.done:
            return
        if marker in self.in_progress:
            raise ValueError(f"Circular placeholder reference at {key!r}")
        self.in_progress.add(marker)

        value = container[key]  # pyright: ignore[reportGeneralTypeIssues]
        match value:
            case str():
                container[key] = self.expand(stack, value)  # pyright: ignore
            case list():
                for i in range(len(value)):
                    self.fill_value(stack, value, i)
            case dict():
                self.fill_table(stack + [value])
            case _:
                pass

        self.in_progress.discard(marker)
        self.done.add(marker)

    def expand(self, stack: list[TOMLDict], text: str) -> str:
        def substitute(match: re.Match[str]) -> str:
            try:
                return self.lookup(stack, match[1])
            except Exception as e:
                e.add_note(f"{match[0]} @ {text!r}")
                raise

        text = _PLACEHOLDER_RE.sub(substitute, text)
        return text.replace("{{", "{").replace("}}", "}")

    def lookup(self, stack: list[TOMLDict], placeholder: str) -> str:
        ups = len(placeholder) - len(placeholder.lstrip("^"))
        tables = stack[: len(stack) - ups] if ups else stack[:]
        if not tables:
            raise KeyError(f"Placeholder climbs above the root table: {placeholder}")

        *path, key = placeholder.lstrip("^").split(".")
        for part in path:
            tables.append(cast_or_raise(tables[-1][part], dict))

        table = tables[-1]
        if key not in table:
            raise KeyError(f"Unknown placeholder key: {placeholder}")
        self.fill_value(tables, table, key)
        return cast_or_raise(table[key], str)
