"""
Train command: run every pending trial of an experiment.
"""

import time
from pathlib import Path

import click

from ..core.experiment import MODE_CHOICES, ExperimentConfig, ExperimentRunner, RunOutcome, resolve_experiment
from ..core.formatting import emit_key_value, format_seconds
from ..core.logging import get_output


def display_config(config: ExperimentConfig) -> None:
    """Display the resolved experiment and where each overridable value came from."""
    click.echo("🚀 twostage experiment")
    click.echo("=" * 50)
    click.echo(f"🗂️  Dataset: {config.dataset.describe()}")
    click.echo(f"🧠 Architecture: {config.architecture}")
    click.echo(f"🎯 Modes: {', '.join(config.modes)}")
    click.echo(f"🎲 Seeds: {', '.join(str(s) for s in config.seeds)}")
    click.echo(f"📁 Output directory: {config.output_dir}")
    click.echo(f"⚙️  Parallel jobs: {config.jobs}")
    click.echo(
        f"🔁 Epochs: stage 1 <= {config.base.stage1_max_epochs}, stage 2 <= {config.base.max_epochs}, "
        f"patience {config.base.patience}"
    )

    click.echo("\n🔧 Argument Sources:")
    click.echo(f"   Config file: {config.source_path}")
    click.echo(f"   Output directory: {config.output_dir_source}")
    click.echo(f"   Modes: {config.modes_source}")
    click.echo(f"   Jobs: {config.jobs_source}")
    click.echo("=" * 50)


def display_summary(outcome: RunOutcome, config: ExperimentConfig, seconds: float) -> None:
    click.echo("\n" + "=" * 60)
    click.echo("🎉 TRAINING COMPLETE!")
    click.echo("=" * 60)
    emit_key_value(
        {
            "Planned trials": outcome.planned,
            "Already complete": outcome.skipped,
            "Run now": outcome.executed,
            "Elapsed": format_seconds(seconds),
            "Manifest": outcome.manifest_path,
        },
        indent=3,
    )
    click.echo("\n💡 Next steps:")
    click.echo(f"   📊 Build the report: uv run twostage report --config {config.source_path}")
    click.echo(f"   🔍 Trial log: {config.output_dir / 'trials.jsonl'}")


@click.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Experiment TOML file",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    help="Run directory (overrides [experiment] output_dir)",
)
@click.option(
    "--mode",
    "-m",
    type=click.Choice(MODE_CHOICES, case_sensitive=False),
    help="Train one mode or all of them (overrides [experiment] modes)",
)
@click.option("--jobs", "-j", type=click.IntRange(min=1), help="Trials to run in parallel processes [default: 1]")
def train(config_path: Path, out: Path | None, mode: str | None, jobs: int | None) -> None:
    """
    Run the grid x seeds trials of an experiment.

    Trials already recorded in the run directory are skipped, so an
    interrupted run picks up where it stopped. 2stg and 2stg+ trials of the
    same configuration and seed share one Stage-1 training.

    ARGUMENT PRECEDENCE (highest to lowest):
    1. Command line arguments (--out, --mode, --jobs)
    2. The experiment file
    3. Built-in defaults

    Examples:
    \b
        # Everything the experiment file asks for
        uv run twostage train --config experiment.toml

        # Only the two-stage frozen setting, four processes
        uv run twostage train --config experiment.toml --mode 2stg --jobs 4

        # Separate run directory
        uv run twostage train --config experiment.toml --out runs/mutag-sage
    """
    config = resolve_experiment(config_path, output_dir=out, mode=mode, jobs=jobs)
    display_config(config)

    runner = ExperimentRunner(config, output=get_output())
    click.echo(f"\n🕸️  Loaded {runner.dataset.name}: {len(runner.dataset)} graphs")
    started = time.perf_counter()
    outcome = runner.run()
    display_summary(outcome, config, time.perf_counter() - started)
