"""
Utility functions for twostage.

Contains stable hashing, seed derivation and the experiment configuration
template used by ``twostage config``.
"""

import hashlib
import json
from pathlib import Path
from typing import Any

import click


def canonical_json(payload: Any) -> str:
    """Serialize ``payload`` with sorted keys and no whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def stable_digest(payload: Any, length: int = 16) -> str:
    """Return a hex SHA-256 prefix of the canonical JSON form of ``payload``."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:length]


def derive_seed(*parts: Any) -> int:
    """Derive a 32-bit seed from arbitrary JSON-serializable parts.

    Used for per-epoch triplet resampling and per-trial initialisation so
    that every random stream is a pure function of (trial seed, purpose).
    """
    return int(stable_digest(list(parts), length=8), 16)


CONFIG_TEMPLATE = """# twostage experiment configuration
# Generated with `twostage config`
# Edit the values below, then run:  twostage train --config {file_name}

version = 1

# =============================================================================
# DATASET - where graphs come from
# =============================================================================
[dataset]
# Options: tudataset, taxi, synthetic, cache
kind = "synthetic"

# tudataset: directory holding {{name}}_A.txt, {{name}}_graph_indicator.txt, ...
# taxi: trip CSV (pickup_datetime,PULocationID,DOLocationID)
# cache: dataset cache written by `twostage ingest`
# path = "data/MUTAG"
# name = "MUTAG"

# taxi only: number of zones (default: largest zone id + 1)
# zone_count = 266

# synthetic only: clique-vs-path graphs
num_graphs = 200
seed = 0

# =============================================================================
# EXPERIMENT
# =============================================================================
[experiment]
# Options: graphsage, gat, diffpool, sagpool
architecture = "graphsage"

# Any of: original, 2stg, 2stg+
modes = ["original", "2stg", "2stg+"]

# Split seeds; reports need exactly five per setting
seeds = [0, 1, 2, 3, 4]

output_dir = "runs/synthetic"

# =============================================================================
# TRAINING - optimizer and early stopping
# =============================================================================
[training]
lr = 0.001
stage1_max_epochs = 200
max_epochs = 100
patience = 20

# =============================================================================
# MODEL - architecture-specific knobs
# =============================================================================
[model]
gat_heads = 4
sagpool_ratio = 0.5
# Default: ceil(0.25 * largest node count)
# diffpool_clusters = 8

# =============================================================================
# GRID - hyperparameter search space (every combination is tried)
# =============================================================================
[grid]
# Dimensions from {{16, 32, 64, 96, 128}}
input_dim = [32]
hidden_dim = [32]
output_dim = [32]
num_layers = [3]
# Options: mean, max
global_pool = ["mean"]
# Margins from {{0.5, 1.0, 1.5, 2.0, 2.5}} (ignored by the original mode)
margin = [1.0]
# Classifier depth 1..3 and hidden width 2^h <= output_dim
classifier_layers = [2]
classifier_hidden = [16]
"""


def create_config_file(path: Path, force: bool = False) -> bool:
    """Write the commented experiment template to ``path``.

    Asks before overwriting an existing file unless ``force`` is set.

    Returns:
        True when the file was written
    """
    if path.exists() and not force:
        click.echo(f"⚠️  {path} already exists!")
        if not click.confirm("Do you want to overwrite it?"):
            click.echo("❌ Configuration file creation cancelled.")
            return False

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(CONFIG_TEMPLATE.format(file_name=path.name), encoding="utf-8")

    click.echo("✅ Configuration file created successfully!")
    click.echo(f"📁 Location: {path.absolute()}")
    click.echo()
    click.echo("🔧 Next steps:")
    click.echo("1. Point [dataset] at your data (or keep the synthetic set)")
    click.echo(f"   twostage ingest --config {path}")
    click.echo("2. Adjust [grid] and [experiment] to the settings you want to compare")
    click.echo("3. Run the trials and build the report:")
    click.echo(f"   twostage train --config {path}")
    click.echo(f"   twostage report --config {path}")
    return True
