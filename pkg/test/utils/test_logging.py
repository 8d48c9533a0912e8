import logging
from pathlib import Path

import pytest
from sslforge.utils import TRACE, setup_logging


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    level, handlers = root.level, root.handlers[:]
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)


@pytest.mark.parametrize(
    ["verbosity", "quiet", "level"],
    [
        (0, False, logging.INFO),
        (1, False, logging.DEBUG),
        (2, False, TRACE),
        (2, True, logging.WARNING),
    ],
)
def test_levels(verbosity: int, quiet: bool, level: int):
    setup_logging(verbosity, quiet=quiet)

    assert logging.getLogger().level == level


def test_repeated_setup_does_not_stack_handlers():
    setup_logging(0)
    count = len(logging.getLogger().handlers)

    setup_logging(1)

    assert len(logging.getLogger().handlers) == count


def test_log_file(tmp_path: Path):
    log_file = tmp_path / "logs" / "run.log"
    setup_logging(0, log_file=log_file)

    logging.getLogger("sslforge.test").info("hello from the run")
    for handler in logging.getLogger().handlers:
        handler.flush()

    assert "hello from the run" in log_file.read_text("utf-8")
