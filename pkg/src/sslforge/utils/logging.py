import logging
from bisect import bisect
from logging import (
    FileHandler,
    Formatter,
    LogRecord,
    StreamHandler,
)
from pathlib import Path
from typing import Any, Literal, Mapping

TRACE = 5
"""For even more verbose logs than `logging.DEBUG` (per-op shapes, file writes)."""

_CONSOLE_FORMAT = (
    "\033[1m[{relativeCreated:.02f} | {levelname} | {name}]\033[0m {message}"
)
_FILE_FORMAT = "[{asctime} | {levelname} | {name}] {message}"


class LevelFormatter(Formatter):
    """Picks a format string by record level: the entry with the smallest level
    that is still >= the record's level, or the highest entry otherwise."""

    def __init__(
        self,
        formats: dict[int, str],
        datefmt: str | None = None,
        style: Literal["%", "{", "$"] = "%",
        validate: bool = True,
        *,
        defaults: Mapping[str, Any] | None = None,
    ):
        super().__init__()

        self.formats = sorted(
            (
                level,
                Formatter(fmt, datefmt, style, validate, defaults=defaults),
            )
            for level, fmt in formats.items()
        )

    def format(self, record: LogRecord) -> str:
        idx = bisect(self.formats, (record.levelno,), hi=len(self.formats) - 1)
        _, formatter = self.formats[idx]
        return formatter.format(record)


def setup_logging(
    verbosity: int,
    *,
    quiet: bool = False,
    log_file: Path | None = None,
):
    logging.addLevelName(TRACE, "TRACE")

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.WARNING if quiet else verbosity_log_level(verbosity))

    # repeated CLI invocations in one process (tests) must not stack handlers
    for handler in root_logger.handlers[:]:
        if getattr(handler, "_sslforge", False):
            root_logger.removeHandler(handler)
            handler.close()

    console = StreamHandler()
    console.setLevel(TRACE)
    console.setFormatter(LevelFormatter({logging.INFO: _CONSOLE_FORMAT}, style="{"))
    _install(root_logger, console)

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(TRACE)
        file_handler.setFormatter(Formatter(_FILE_FORMAT, style="{"))
        _install(root_logger, file_handler)

    logger = logging.getLogger(__name__)
    logger.debug("Logging configured.")


def _install(root_logger: logging.Logger, handler: logging.Handler):
    setattr(handler, "_sslforge", True)
    root_logger.addHandler(handler)


def verbosity_log_level(verbosity: int) -> int:
    match verbosity:
        case 0:
            return logging.INFO
        case 1:
            return logging.DEBUG
        case _:
            return TRACE
