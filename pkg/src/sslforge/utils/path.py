import logging
from pathlib import Path

from .logging import TRACE

logger = logging.getLogger(__name__)


def write_to_path(path: Path, data: str | bytes, encoding: str = "utf-8"):
    logger.log(TRACE, f"Writing to {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    match data:
        case str():
            path.write_text(data, encoding)
        case _:
            path.write_bytes(data)


def unique_stem(path: Path, taken: set[str]) -> str:
    """Run id for a metrics file: its parent directory name (or stem, for files at
    the top level), suffixed with `-2`, `-3`, ... until it is not in `taken`."""
    base = path.parent.name or path.stem
    candidate = base
    n = 2
    while candidate in taken:
        candidate = f"{base}-{n}"
        n += 1
    taken.add(candidate)
    return candidate
