"""Training metrics files and the long-format series derived from them."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from sslforge.errors import DataError
from sslforge.utils import unique_stem, write_to_path

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.csv"


@dataclass(frozen=True)
class MetricsRecord:
    """One row of `metrics.csv`; the field order is the column order."""

    step: int
    epoch: int
    loss: float
    inv: float | None = None
    var: float | None = None
    cov: float | None = None
    diag: float | None = None
    offdiag: float | None = None
    recon: float | None = None
    lr: float | None = None
    ema_xi: float | None = None
    rankme_backbone: float | None = None
    rankme_projector: float | None = None
    rankme_predictor: float | None = None
    online_probe_acc: float | None = None
    wall_time: float | None = None

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        return [_format(value) for value in asdict(self).values()]


METRICS_COLUMNS = MetricsRecord.columns()
TERM_COLUMNS = ("inv", "var", "cov", "diag", "offdiag", "recon")
TIMING_COLUMNS = ("wall_time",)


def _format(value: int | float | None) -> str:
    # repr keeps every float bit, so reruns compare byte for byte
    return "" if value is None else repr(value)


def _parse(value: str) -> float | None:
    return float(value) if value else None


def format_metrics(records: Iterable[MetricsRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    writer.writerows(record.row() for record in records)
    return buffer.getvalue()


def write_metrics(path: Path, records: Sequence[MetricsRecord]):
    steps = [record.step for record in records]
    if steps != sorted(set(steps)):
        raise DataError(f"Metrics steps must be strictly increasing, got {steps}")
    logger.debug(f"Writing {len(records)} metrics rows to {path}")
    write_to_path(path, format_metrics(records))


def read_metrics(path: Path) -> list[MetricsRecord]:
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != METRICS_COLUMNS:
            raise DataError(f"{path}: unexpected metrics header {header}")

        records: list[MetricsRecord] = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} cells, got {len(row)}")
            step, epoch, *rest = row
            try:
                records.append(
                    MetricsRecord(int(step), int(epoch), *(_parse(v) for v in rest))  # pyright: ignore[reportArgumentType]
                )
            except ValueError as e:
                raise DataError(f"{path}:{line}: {e}") from e
    return records


# plot data

PLOT_COLUMNS = ["run", "step", "metric", "value"]


class PlotPoint(NamedTuple):
    run: str
    step: int
    metric: str
    value: float


def plot_points(run: str, records: Iterable[MetricsRecord]) -> Iterable[PlotPoint]:
    for record in records:
        for name, value in asdict(record).items():
            if name == "step" or value is None:
                continue
            yield PlotPoint(run, record.step, name, float(value))


def emit_plot_data(metrics_files: Sequence[Path], output: Path) -> list[PlotPoint]:
    """Tidy (run, step, metric, value) rows for every metrics file; empty cells are
    skipped. Each file's run id is its run directory name, made unique."""
    taken = set[str]()
    points: list[PlotPoint] = []
    for path in metrics_files:
        run = unique_stem(path, taken)
        points.extend(plot_points(run, read_metrics(path)))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PLOT_COLUMNS)
    writer.writerows(
        [point.run, point.step, point.metric, repr(point.value)] for point in points
    )
    write_to_path(output, buffer.getvalue())

    logger.info(f"Wrote {len(points)} points from {len(metrics_files)} runs to {output}")
    return points


def read_plot_data(path: Path) -> list[PlotPoint]:
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        if (header := next(reader, None)) != PLOT_COLUMNS:
            raise DataError(f"{path}: unexpected plot data header {header}")
        return [PlotPoint(run, int(step), metric, float(value)) for run, step, metric, value in reader]
