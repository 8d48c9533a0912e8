from pathlib import Path
from typing import Any

import pytest
from sslforge.errors import ConfigError
from sslforge.harness import ExperimentConfig, Splits, run_hparam_sweep
from sslforge.harness.sweep import SWEEP_CSV, SWEEP_DIR, rank_correlation

from ..conftest import merged


def test_rank_correlation():
    rho, reason = rank_correlation([1.0, 2.0, 3.0], [0.1, 0.3, 0.2])

    assert rho == pytest.approx(0.5)
    assert reason is None


@pytest.mark.parametrize(
    ["x", "y"],
    [
        ([1.0], [0.5]),
        ([None, 2.0], [0.5, 0.6]),
        ([1.0, 2.0, 3.0], [0.5, 0.5, 0.5]),
    ],
)
def test_rank_correlation_undefined(x: list[float | None], y: list[float]):
    rho, reason = rank_correlation(x, y)

    assert rho is None
    assert reason


def test_without_sweep_section(tiny_config: ExperimentConfig, tiny_splits: Splits):
    with pytest.raises(ConfigError):
        run_hparam_sweep(tiny_config, tiny_splits)


def test_single_cell(tiny_raw: dict[str, Any], tiny_splits: Splits, tmp_path: Path):
    config = ExperimentConfig.from_raw(
        merged(tiny_raw, sweep={"parameter": "method.loss.tau", "values": [0.2]})
    )

    result = run_hparam_sweep(config, tiny_splits)

    assert len(result.cells) == 1
    assert result.spearman is None
    assert result.reason is not None
    assert 0 <= result.cells[0].probe_accuracy <= 1

    table = (config.output_dir / SWEEP_DIR / SWEEP_CSV).read_text("utf-8")
    assert table.splitlines()[0] == "method.loss.tau,rankme,probe_accuracy"
    # cells skip the embedding dumps
    assert not (config.output_dir / SWEEP_DIR / "cell0" / "embeddings").exists()


def test_bad_sweep_value(tiny_raw: dict[str, Any], tiny_splits: Splits):
    config = ExperimentConfig.from_raw(
        merged(tiny_raw, sweep={"parameter": "method.loss.tau", "values": [-1.0]})
    )

    with pytest.raises(ConfigError):
        run_hparam_sweep(config, tiny_splits)
