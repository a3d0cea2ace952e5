"""
Config command for creating experiment configuration files.
"""

from pathlib import Path

import click

from ..core.utils import create_config_file


@click.command()
@click.option(
    "--path",
    "-p",
    "path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("experiment.toml"),
    show_default=True,
    help="Where to write the configuration template",
)
@click.option("--force", is_flag=True, help="Overwrite an existing file without asking")
def config(path: Path, force: bool) -> None:
    """
    Create an experiment.toml template with default values and helpful comments.

    The template covers:
    - Dataset source (TUDataset directory, taxi trip CSV, synthetic or cache)
    - Architecture, training modes and split seeds
    - Optimizer, epoch limits and early-stopping patience
    - The hyperparameter grid searched for every mode

    Examples:
    \b
        # Create configuration file
        uv run twostage config

        # Write it somewhere else
        uv run twostage config --path experiments/mutag.toml

        # After editing, run the experiment
        uv run twostage train --config experiment.toml
    """
    create_config_file(path, force=force)
