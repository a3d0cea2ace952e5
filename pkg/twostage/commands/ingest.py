"""
Ingest command: parse a dataset source, print its statistics and write the cache.
"""

from dataclasses import dataclass
from pathlib import Path

import click

from ..core.exceptions import InvalidConfigurationError
from ..core.experiment import DatasetSource, load_experiment_config
from ..core.formatting import emit_header, emit_key_value, format_histogram
from ..core.graph_data import GraphDataset, save_dataset


@dataclass
class IngestConfig:
    """Configuration for ingest command."""

    source: DatasetSource
    cache_path: Path | None = None

    # Source tracking for display
    source_origin: str = "CLI"
    cache_source: str = "Default"


def resolve_config(
    tudataset: Path | None,
    name: str | None,
    taxi: Path | None,
    zone_count: int | None,
    synthetic: int | None,
    config_path: Path | None,
    out: Path | None,
) -> IngestConfig:
    """Pick exactly one dataset source from the CLI arguments.

    Raises:
        InvalidConfigurationError: zero or several sources given
    """
    candidates = {"--tudataset": tudataset, "--taxi": taxi, "--synthetic": synthetic, "--config": config_path}
    given = [flag for flag, value in candidates.items() if value is not None]
    if len(given) != 1:
        raise InvalidConfigurationError(
            "Give exactly one dataset source",
            field="source",
            details=f"got {', '.join(given) if given else 'none'}; use --tudataset, --taxi, --synthetic or --config",
        )

    if tudataset is not None:
        config = IngestConfig(DatasetSource(kind="tudataset", path=tudataset, name=name))
    elif taxi is not None:
        config = IngestConfig(DatasetSource(kind="taxi", path=taxi, name=name, zone_count=zone_count))
    elif synthetic is not None:
        config = IngestConfig(DatasetSource(kind="synthetic", num_graphs=synthetic))
    else:
        assert config_path is not None
        config = IngestConfig(load_experiment_config(config_path).dataset, source_origin=f"Config file {config_path}")

    if out is not None:
        config.cache_path = out
        config.cache_source = "CLI"
    return config


def display_stats(dataset: GraphDataset) -> None:
    """Print the dataset statistics block."""
    stats = dataset.stats()
    click.echo()
    emit_header(f"🗂️  Dataset: {dataset.name}", width=50)
    emit_key_value(
        {
            "Graphs": stats.num_graphs,
            "Avg. nodes": f"{stats.mean_nodes:.2f}",
            "Avg. edges": f"{stats.mean_edges:.2f}",
            "Classes": stats.num_classes,
            "Class histogram": format_histogram(stats.class_histogram),
            "Feature categories": stats.num_feature_categories,
            "Max nodes": stats.max_nodes,
            "Edges": "directed" if dataset.directed else "undirected",
        },
        indent=3,
    )


@click.command()
@click.option(
    "--tudataset",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="TUDataset directory holding {name}_A.txt, {name}_graph_indicator.txt, ...",
)
@click.option("--name", "-n", help="Dataset name (TUDataset file prefix; defaults to the directory name)")
@click.option(
    "--taxi",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Trip CSV with pickup_datetime,PULocationID,DOLocationID columns",
)
@click.option("--zone-count", type=click.IntRange(min=1), help="Number of taxi zones (default: largest id + 1)")
@click.option("--synthetic", type=click.IntRange(min=10), help="Generate N clique-vs-path graphs")
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Use the [dataset] section of an experiment file",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Cache file to write (default: <name>.dataset.json)",
)
def ingest(
    tudataset: Path | None,
    name: str | None,
    taxi: Path | None,
    zone_count: int | None,
    synthetic: int | None,
    config_path: Path | None,
    out: Path | None,
) -> None:
    """
    Parse a dataset, print its statistics and write the dataset cache.

    The cache is a versioned JSON document that `[dataset] kind = "cache"`
    reads back without re-parsing.

    Examples:
    \b
        # TUDataset benchmark
        uv run twostage ingest --tudataset data/MUTAG

        # Hourly taxi graphs from a trip CSV
        uv run twostage ingest --taxi data/yellow_2019_01.csv --zone-count 266

        # Synthetic clique-vs-path graphs
        uv run twostage ingest --synthetic 200 --out synthetic.dataset.json

        # Whatever an experiment file points at
        uv run twostage ingest --config experiment.toml
    """
    config = resolve_config(tudataset, name, taxi, zone_count, synthetic, config_path, out)

    click.echo("🚀 twostage dataset ingest")
    click.echo("=" * 50)
    click.echo(f"📄 Source: {config.source.describe()}")
    click.echo("\n🔧 Argument Sources:")
    click.echo(f"   Source: {config.source_origin}")
    click.echo(f"   Cache: {config.cache_source}")
    click.echo("=" * 50)

    dataset = config.source.load()
    display_stats(dataset)

    cache_path = config.cache_path or Path(f"{dataset.name}.dataset.json")
    save_dataset(dataset, cache_path)
    click.echo(f"\n💾 Cache written: {cache_path}")
    click.echo("\n💡 Next steps:")
    click.echo(f'   🔧 Use it in an experiment: [dataset] kind = "cache", path = "{cache_path}"')
    click.echo("   🚀 Train: uv run twostage train --config experiment.toml")
