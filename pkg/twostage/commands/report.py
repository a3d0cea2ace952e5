"""
Report command: summary tables and embedding analysis for a run directory.
"""

from pathlib import Path

import click

from ..core.exceptions import InvalidConfigurationError
from ..core.experiment import build_report, resolve_experiment
from ..core.formatting import emit_header, emit_table
from ..core.logging import get_output


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


@click.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Experiment TOML file whose output_dir holds the run",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Run directory (overrides the experiment's output_dir)",
)
@click.option("--plots", is_flag=True, help="Also render scatter and correlation-trace PNGs")
def report(config_path: Path | None, out: Path | None, plots: bool) -> None:
    """
    Summarize a run: accuracy mean ± std per dataset, architecture and mode.

    Only settings with every configured split get a row; incomplete groups are
    listed as partial. Each row also gets an analysis directory with the
    intrinsic dimension, the explained-variance curve, the correlation
    trace and a 2-D principal-component scatter.

    Examples:
    \b
        # Report the run an experiment file points at
        uv run twostage report --config experiment.toml

        # Report an explicit run directory, with plots
        uv run twostage report --out runs/mutag-sage --plots
    """
    expected: int | None = None
    if config_path is not None:
        experiment = resolve_experiment(config_path)
        expected = len(experiment.seeds)
        run_dir = out if out is not None else experiment.output_dir
    elif out is not None:
        run_dir = out
    else:
        raise InvalidConfigurationError("Give --config or --out", field="--out")

    click.echo(f"📊 Building report for {run_dir}")
    result = build_report(run_dir, plots=plots, output=get_output(), expected=expected)

    click.echo()
    emit_header("📊 Test accuracy over all splits", width=60)
    emit_table(
        ("dataset", "architecture", "mode", "accuracy", "intrinsic dim", "avg |corr|"),
        [
            (
                row["dataset"],
                row["architecture"],
                row["mode"],
                row["accuracy"],
                _fmt(row["intrinsic_dimension"]),
                _fmt(row["avg_abs_correlation"]),
            )
            for row in result.summary
        ],
    )
    if result.partial:
        click.echo(f"\n⚠️  {len(result.partial)} partial group(s) without five complete splits")

    click.echo(f"\n📁 Wrote {len(result.written)} file(s) under {run_dir}")
