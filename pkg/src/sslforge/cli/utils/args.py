import logging
from pathlib import Path
from typing import Annotated, Optional

from typer import Argument, Option

from sslforge import SSLFORGE_ENV_PREFIX
from sslforge.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILES = [
    "sslforge.toml",
    "config/sslforge.toml",
]

DEFAULT_PLOT_DATA = Path("plot_data.csv")


def get_default_config() -> Path:
    for path in DEFAULT_CONFIG_FILES:
        path = Path(path)
        if path.is_file():
            logger.debug(f"Loading config from default path: {path}")
            return path

    raise ConfigError(
        f"Config file not found at any default path: {', '.join(DEFAULT_CONFIG_FILES)}"
    )


PathArgument = Annotated[Path, Argument()]

ConfigArgument = Annotated[
    Optional[Path],
    Argument(
        envvar=f"{SSLFORGE_ENV_PREFIX}CONFIG",
        show_default="sslforge.toml",
    ),
]

VerbosityOption = Annotated[int, Option("--verbose", "-v", count=True)]

QuietOption = Annotated[bool, Option("--quiet", "-q")]

SeedOption = Annotated[
    Optional[int],
    Option(help=f"Overrides run.seed and {SSLFORGE_ENV_PREFIX}SEED."),
]

EpochsOption = Annotated[Optional[int], Option(help="Overrides run.epochs.")]

OutputDirOption = Annotated[
    Optional[Path],
    Option("--output-dir", "-o", help="Overrides run.output_dir."),
]

QueryOption = Annotated[
    Optional[Path],
    Option(help="Query embeddings; without them the last --val-fraction rows are held out."),
]

QueryLabelsOption = Annotated[
    Optional[Path],
    Option(help="Query labels, when the query dump carries none."),
]

ValFractionOption = Annotated[float, Option(min=0.0, max=1.0)]
