import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Iterator, List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.table import Table
from scipy.stats import norm
from typer import Argument, Option, Typer

from sslforge.__version__ import VERSION
from sslforge.data import write_dataset
from sslforge.errors import ConfigError, NumericalAbort
from sslforge.eval import (
    ProbeConfig,
    knn_classify,
    linear_probe,
    mlp_probe,
    read_embeddings,
    spectrum_report,
)
from sslforge.harness import (
    Pretrainer,
    emit_plot_data,
    run_collapse_experiment,
    run_eval,
    run_hparam_sweep,
    run_pretrain,
)
from sslforge.harness.datasets import load_dataset
from sslforge.losses import GaussianNoise, nce_binary_fit
from sslforge.optim import schedule_table
from sslforge.utils import setup_logging

from .utils.args import (
    DEFAULT_PLOT_DATA,
    ConfigArgument,
    EpochsOption,
    OutputDirOption,
    PathArgument,
    QueryLabelsOption,
    QueryOption,
    QuietOption,
    SeedOption,
    ValFractionOption,
    VerbosityOption,
)
from .utils.load import holdout, load_config, load_labeled

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ABORT = 3

app = Typer(
    pretty_exceptions_enable=False,
    context_settings={
        "help_option_names": ["--help", "-h"],
    },
)

console = Console()


@contextmanager
def exit_codes() -> Iterator[None]:
    """Maps config problems to exit code 2 and non-finite losses to exit code 3."""
    try:
        yield
    except ConfigError as e:
        logger.error(str(e))
        raise typer.Exit(EXIT_CONFIG_ERROR)
    except NumericalAbort as e:
        logger.error(f"{e} (outputs so far were kept)")
        raise typer.Exit(EXIT_NUMERICAL_ABORT)


def _query_sets(
    embeddings: Path,
    labels: Path | None,
    query: Path | None,
    query_labels: Path | None,
    val_fraction: float,
):
    dump, values = load_labeled(embeddings, labels)
    if query is None:
        return holdout(dump.values, values, val_fraction)
    query_dump, query_values = load_labeled(query, query_labels)
    return (dump.values, values), (query_dump.values, query_values)


@app.command()
def version():
    """Print the installed sslforge version."""
    typer.echo(VERSION)


@app.command()
def pretrain(
    config_file: ConfigArgument = None,
    *,
    seed: SeedOption = None,
    epochs: EpochsOption = None,
    output_dir: OutputDirOption = None,
    verbosity: VerbosityOption = 0,
    quiet: QuietOption = False,
):
    """Pretrain an encoder; writes the checkpoint, metrics.csv and embedding dumps."""
    with exit_codes():
        config = load_config(
            config_file,
            verbosity,
            quiet=quiet,
            seed=seed,
            epochs=epochs,
            output_dir=output_dir,
        )
        result = run_pretrain(config)

    table = Table("tap", "RankMe", title=config.run.name)
    for tap, value in result.rankme.items():
        if value is not None:
            table.add_row(tap, f"{value:.3f}")
    console.print(table)
    console.print(f"Outputs in {result.output_dir}")


@app.command("eval")
def evaluate(
    config_file: PathArgument,
    checkpoint: Annotated[
        Optional[Path],
        Argument(help="Checkpoint directory; omit to evaluate a random encoder."),
    ] = None,
    *,
    seed: SeedOption = None,
    output_dir: OutputDirOption = None,
    verbosity: VerbosityOption = 0,
    quiet: QuietOption = False,
):
    """Probe a frozen encoder at every tap; writes eval_report.json."""
    with exit_codes():
        config = load_config(config_file, verbosity, quiet=quiet, seed=seed, output_dir=output_dir)
        report = run_eval(config, checkpoint)

    table = Table("tap", "dim", "kNN", "linear", "MLP", "RankMe", "alpha", title="Evaluation")
    for tap in report.taps:
        table.add_row(
            tap.tap,
            str(tap.dim),
            f"{tap.knn_accuracy:.4f}",
            f"{tap.linear_probe.final_accuracy:.4f}",
            f"{tap.mlp_probe.final_accuracy:.4f}",
            f"{tap.rankme:.3f}",
            "-" if tap.alpha is None else f"{tap.alpha:.3f}",
        )
    console.print(table)
    console.print(f"Chance level: {report.chance:.4f}")


@app.command()
def sweep(
    config_file: ConfigArgument = None,
    *,
    seed: SeedOption = None,
    output_dir: OutputDirOption = None,
    verbosity: VerbosityOption = 0,
    quiet: QuietOption = False,
):
    """Train one short run per [sweep] value and rank-correlate RankMe with probe accuracy."""
    with exit_codes():
        config = load_config(config_file, verbosity, quiet=quiet, seed=seed, output_dir=output_dir)
        result = run_hparam_sweep(config)

    table = Table(result.parameter, "RankMe", "probe accuracy", title=f"Sweep ({result.tap})")
    for cell in result.cells:
        rank = "-" if cell.rankme is None else f"{cell.rankme:.3f}"
        table.add_row(str(cell.value), rank, f"{cell.probe_accuracy:.4f}")
    console.print(table)
    if result.spearman is None:
        console.print(f"Spearman: undefined ({result.reason})")
    else:
        console.print(f"Spearman: {result.spearman:.3f}")


@app.command()
def rankme(
    embeddings: PathArgument,
    *,
    eps: Annotated[float, Option(min=0.0)] = 1e-7,
    verbosity: VerbosityOption = 0,
):
    """Spectrum diagnostics of an embedding dump: RankMe, alpha and numeric rank."""
    setup_logging(verbosity)
    dump = read_embeddings(embeddings)
    report = spectrum_report(dump.values, eps)

    table = Table("metric", "value", title=f"{dump.tap} @ step {dump.step} ({dump.split})")
    for name, value in report.summary().items():
        table.add_row(name, "-" if value is None else f"{value:.6g}")
    console.print(table)


@app.command()
def knn(
    embeddings: PathArgument,
    labels: Annotated[Optional[Path], Argument()] = None,
    *,
    query: QueryOption = None,
    query_labels: QueryLabelsOption = None,
    val_fraction: ValFractionOption = 0.2,
    k: Annotated[int, Option(min=1)] = 20,
    temperature: Annotated[float, Option(min=0.0, min_open=True)] = 0.07,
    majority: bool = False,
    verbosity: VerbosityOption = 0,
):
    """Cosine kNN accuracy of labeled embeddings."""
    setup_logging(verbosity)
    (train_Z, train_y), (query_Z, query_y) = _query_sets(
        embeddings, labels, query, query_labels, val_fraction
    )
    if k > len(train_Z):
        logger.warning(f"k={k} exceeds the {len(train_Z)} reference rows; using k={len(train_Z)}")
        k = len(train_Z)
    result = knn_classify(
        train_Z,
        train_y,
        query_Z,
        query_y,
        k=k,
        temperature=temperature,
        mode="majority" if majority else "weighted",
    )
    console.print(f"kNN accuracy (k={k}): {result.accuracy:.4f}")


@app.command()
def probe(
    embeddings: PathArgument,
    labels: Annotated[Optional[Path], Argument()] = None,
    *,
    query: QueryOption = None,
    query_labels: QueryLabelsOption = None,
    val_fraction: ValFractionOption = 0.2,
    mlp: bool = False,
    epochs: Annotated[int, Option(min=0)] = 100,
    lr: Annotated[float, Option(min=0.0)] = 0.05,
    seed: int = 0,
    verbosity: VerbosityOption = 0,
):
    """Train a linear (or MLP) probe on frozen embeddings."""
    setup_logging(verbosity)
    (train_Z, train_y), (query_Z, query_y) = _query_sets(
        embeddings, labels, query, query_labels, val_fraction
    )
    config = ProbeConfig(epochs=epochs, lr=lr, seed=seed)
    train_probe = mlp_probe if mlp else linear_probe
    result = train_probe(train_Z, train_y, query_Z, query_y, config)
    console.print(
        f"{'MLP' if mlp else 'Linear'} probe: final {result.final_accuracy:.4f}, "
        f"best {result.best_accuracy:.4f} at epoch {result.best_epoch}"
    )


@app.command()
def schedule(
    config_file: ConfigArgument = None,
    *,
    epochs: EpochsOption = None,
    steps: Annotated[Optional[int], Option(min=0, help="Overrides the total steps.")] = None,
    warmup: Annotated[Optional[int], Option(min=0, help="Overrides the warmup steps.")] = None,
    peak: Annotated[Optional[float], Option(min=0.0, help="Overrides the scaled peak lr.")] = None,
    ema_start: Annotated[
        Optional[float], Option(min=0.0, max=1.0, help="Overrides ema.xi_start.")
    ] = None,
    dump: Annotated[bool, Option("--dump", help="Print CSV instead of a table.")] = False,
    verbosity: VerbosityOption = 0,
):
    """The learning-rate and EMA momentum schedules that pretrain would use, step by step."""
    with exit_codes():
        # log lines would interleave with the CSV
        config = load_config(config_file, verbosity, quiet=dump, epochs=epochs)
        if ema_start is not None:
            config = config.with_override("ema.xi_start", ema_start)
        trainer = Pretrainer(config)
        rows = trainer.schedule()
        if steps is not None or warmup is not None or peak is not None:
            total = trainer.total_steps if steps is None else steps
            warmup_steps = min(trainer.warmup_steps, total) if warmup is None else warmup
            if warmup_steps > total:
                raise ConfigError(f"Warmup ({warmup_steps}) must not exceed the steps ({total})")
            rows = schedule_table(
                total,
                warmup_steps,
                trainer.peak_lr if peak is None else peak,
                config.ema.xi_start,
                config.ema.schedule,
            )

    if dump:
        typer.echo("step,lr,ema_xi")
        for row in rows:
            typer.echo(f"{row.step},{row.lr!r},{row.ema_xi!r}")
        return

    table = Table("step", "lr", "ema ξ", title="Schedule")
    for row in rows:
        table.add_row(str(row.step), f"{row.lr:.6g}", f"{row.ema_xi:.6f}")
    console.print(table)


@app.command()
def plotdata(
    metrics: Annotated[List[Path], Argument()],
    *,
    output: Annotated[Path, Option("--output", "-o")] = DEFAULT_PLOT_DATA,
    verbosity: VerbosityOption = 0,
):
    """Merge metrics.csv files into one long-format (run, step, metric, value) CSV."""
    setup_logging(verbosity)
    points = emit_plot_data(metrics, output)
    console.print(f"Wrote {len(points)} points to {output}")


@app.command()
def dataset(
    config_file: ConfigArgument = None,
    *,
    output: Annotated[Path, Option("--output", "-o")] = Path("dataset.ssld"),
    seed: SeedOption = None,
    verbosity: VerbosityOption = 0,
):
    """Write the config's dataset to an SSLD file."""
    with exit_codes():
        config = load_config(config_file, verbosity, seed=seed)
        images = load_dataset(config.dataset)
    write_dataset(output, images)
    console.print(f"Wrote {len(images)} images ({images.size}px) to {output}")


@app.command()
def collapse(
    config_file: ConfigArgument = None,
    *,
    seed: SeedOption = None,
    epochs: EpochsOption = None,
    output_dir: OutputDirOption = None,
    verbosity: VerbosityOption = 0,
    quiet: QuietOption = False,
):
    """Invariance-only vs VICReg from the same seed: projector RankMe of each."""
    with exit_codes():
        config = load_config(
            config_file,
            verbosity,
            quiet=quiet,
            seed=seed,
            epochs=epochs,
            output_dir=output_dir,
        )
        result = run_collapse_experiment(config)

    table = Table("variant", f"{result.tap} RankMe", title=f"Collapse (d = {result.dim})")
    for name, value in result.rankme.items():
        table.add_row(name, "-" if value is None else f"{value:.3f}")
    console.print(table)


@app.command()
def nce(
    *,
    samples: Annotated[int, Option(min=1)] = 4000,
    steps: Annotated[int, Option(min=1)] = 5000,
    noise_std: Annotated[float, Option(min=0.0)] = 1.5,
    lr: Annotated[float, Option(min=0.0)] = 0.05,
    seed: int = 0,
    verbosity: VerbosityOption = 0,
):
    """Fit a log-quadratic density to standard normal data by noise-contrastive estimation."""
    setup_logging(verbosity)
    rng = np.random.default_rng(seed)
    noise = GaussianNoise(std=noise_std)
    fit = nce_binary_fit(rng.normal(size=samples), noise, rng=rng, steps=steps, lr=lr)

    grid = np.linspace(-2, 2, 41)
    error = float(np.abs(fit.log_density(grid) - norm.logpdf(grid)).max())
    a0, a1, a2 = fit.theta
    console.print(f"log f(x) + c = {a0 + fit.c:.4f} + {a1:.4f}·x + {a2:.4f}·x²")
    console.print(f"max |error| on [-2, 2]: {error:.4f}")


if __name__ == "__main__":
    app()
