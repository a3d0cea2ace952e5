"""
Main CLI entry point for twostage.

Provides a unified command-line interface for ingesting graph datasets,
running two-stage and end-to-end training experiments, and reporting
their results.
"""

from typing import Any

import click

from . import __version__
from .commands.config import config
from .commands.ingest import ingest
from .commands.report import report
from .commands.train import train
from .core.exceptions import ConfigurationError, DataError, TwoStageError
from .core.logging import OutputConfig, configure_output, get_output

EXIT_FAILURE = 1
EXIT_USAGE = 2


class TwoStageGroup(click.Group):
    """Click group mapping library errors onto exit codes.

    Configuration and data errors exit with 2 (like click usage errors),
    every other failure with 1.
    """

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except (ConfigurationError, DataError) as e:
            get_output().error(str(e))
            ctx.exit(EXIT_USAGE)
        except TwoStageError as e:
            get_output().error(str(e))
            ctx.exit(EXIT_FAILURE)
        except Exception as e:
            out = get_output()
            out.error(f"Unexpected error: {e}")
            if out.config.verbose:
                out.traceback()
            ctx.exit(EXIT_FAILURE)


@click.group(cls=TwoStageGroup)
@click.version_option(version=__version__, prog_name="twostage")
@click.option("--verbose", "-v", is_flag=True, help="Show per-epoch training lines")
@click.option("--no-emoji", is_flag=True, help="Plain-text log prefixes")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, no_emoji: bool) -> None:
    """
    twostage - two-stage training for graph classification

    Trains GNN encoders (GraphSAGE, GAT, DiffPool, SAGPool) three ways and
    compares them: end-to-end (original), triplet-loss pre-training with a
    classifier on frozen embeddings (2stg), and the same pre-training followed
    by joint fine-tuning (2stg+).

    WORKFLOW:
    1. Create configuration: twostage config
    2. Check the dataset: twostage ingest --config experiment.toml
    3. Run the trials: twostage train --config experiment.toml
    4. Summarize: twostage report --config experiment.toml

    CONFIGURATION:
    Experiments are TOML files; environment variables are not consulted.
    Command-line arguments take precedence over the file.

    Examples:
    \b
        # Setup and basic workflow
        uv run twostage config
        uv run twostage train --config experiment.toml
        uv run twostage report --config experiment.toml --plots

        # Datasets
        uv run twostage ingest --tudataset data/MUTAG
        uv run twostage ingest --taxi trips.csv --zone-count 266

        # Parallel trials of one mode
        uv run twostage train --config experiment.toml --mode 2stg+ --jobs 4
    """
    ctx.ensure_object(dict)
    ctx.obj["output"] = configure_output(OutputConfig(use_emoji=not no_emoji, verbose=verbose))


# Add commands to the CLI group
cli.add_command(config)
cli.add_command(ingest)
cli.add_command(train)
cli.add_command(report)


# Convenience function for programmatic access
def main() -> None:
    """Main entry point for the CLI application."""
    cli()


if __name__ == "__main__":
    main()
