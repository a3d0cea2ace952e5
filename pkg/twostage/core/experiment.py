"""
Experiment configuration, trial runner and report builder.

An experiment is a TOML document naming a dataset source, an architecture,
the training modes to compare, a hyperparameter grid and the split seeds.
The runner expands it into trials, skips trials already recorded in the
run's ``trials.jsonl`` and writes per-trial checkpoints and validation
embeddings. The manifest and the report are both rebuilt from the log.
"""

from __future__ import annotations

import math
import tomllib
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import analyze_embeddings, export_scatter_2d, render_plots, write_analysis
from .artifacts import append_jsonl, read_json, read_jsonl, repair_jsonl, write_csv, write_json
from .exceptions import ArtifactError, DomainError, InvalidConfigurationError
from .formatting import format_mean_std
from .graph_data import (
    GraphDataset,
    build_taxi_dataset,
    dataset_to_dict,
    load_dataset,
    parse_tudataset,
    read_trip_csv,
)
from .logging import Output, OutputConfig, configure_output, get_output
from .models import ClassifierConfig, ModelConfig, checkpoint_payload
from .synthetic import clique_path_dataset
from .training import (
    DEFAULT_SEEDS,
    MODES,
    HyperparameterGrid,
    Stage1Result,
    TrainConfig,
    normalize_mode,
    run_trial,
    select_setting,
)
from .utils import stable_digest

CONFIG_VERSION = 1
MANIFEST_FORMAT = "twostage-manifest"
MANIFEST_VERSION = 1
REPORT_FORMAT = "twostage-report"
REPORT_VERSION = 1

DATASET_KINDS = ("tudataset", "taxi", "synthetic", "cache")
MODE_CHOICES = (*MODES, "all")

TRIAL_LOG = "trials.jsonl"
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"

SUMMARY_COLUMNS = (
    "dataset",
    "architecture",
    "mode",
    "accuracy",
    "test_mean",
    "test_std",
    "val_mean",
    "intrinsic_dimension",
    "avg_abs_correlation",
    "final_correlation",
    "separation_ratio",
    "setting_key",
)

_CONFIG_KEYS: dict[str, dict[str, tuple[type, ...]]] = {
    "dataset": {
        "kind": (str,),
        "path": (str,),
        "name": (str,),
        "zone_count": (int,),
        "num_graphs": (int,),
        "seed": (int,),
    },
    "experiment": {"architecture": (str,), "modes": (list,), "seeds": (list,), "output_dir": (str,)},
    "training": {"lr": (int, float), "max_epochs": (int,), "stage1_max_epochs": (int,), "patience": (int,)},
    "model": {"gat_heads": (int,), "sagpool_ratio": (int, float), "diffpool_clusters": (int,)},
    "grid": {
        "input_dim": (list,),
        "hidden_dim": (list,),
        "output_dim": (list,),
        "num_layers": (list,),
        "global_pool": (list,),
        "margin": (list,),
        "classifier_layers": (list,),
        "classifier_hidden": (list,),
    },
}
_GRID_ITEM_TYPES: dict[str, tuple[type, ...]] = {
    "input_dim": (int,),
    "hidden_dim": (int,),
    "output_dim": (int,),
    "num_layers": (int,),
    "global_pool": (str,),
    "margin": (int, float),
    "classifier_layers": (int,),
    "classifier_hidden": (int,),
}


# ============================================================================
# Configuration
# ============================================================================


@dataclass(frozen=True)
class DatasetSource:
    """Where an experiment's graphs come from."""

    kind: str = "synthetic"
    path: Path | None = None
    name: str | None = None
    zone_count: int | None = None
    num_graphs: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in DATASET_KINDS:
            raise InvalidConfigurationError(
                f"Unknown dataset kind '{self.kind}'", field="dataset.kind", details=f"use {', '.join(DATASET_KINDS)}"
            )
        if self.kind != "synthetic" and self.path is None:
            raise InvalidConfigurationError(f"dataset kind '{self.kind}' needs a path", field="dataset.path")
        if self.zone_count is not None and self.zone_count < 1:
            raise InvalidConfigurationError("zone_count must be positive", field="dataset.zone_count")
        if self.num_graphs < 10:
            raise InvalidConfigurationError("num_graphs must be at least 10", field="dataset.num_graphs")

    def load(self) -> GraphDataset:
        """Parse, build or read the dataset this source describes."""
        match self.kind:
            case "tudataset":
                assert self.path is not None
                return parse_tudataset(self.path, self.name or self.path.name)
            case "taxi":
                assert self.path is not None
                trips = read_trip_csv(self.path)
                return build_taxi_dataset(trips, self.zone_count, name=self.name or self.path.stem)
            case "cache":
                assert self.path is not None
                return load_dataset(self.path)
            case _:
                return clique_path_dataset(self.num_graphs, seed=self.seed)

    def describe(self) -> str:
        if self.kind == "synthetic":
            return f"synthetic clique-vs-path ({self.num_graphs} graphs, seed {self.seed})"
        return f"{self.kind}: {self.path}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "path": str(self.path) if self.path is not None else None,
            "name": self.name,
            "zone_count": self.zone_count,
            "num_graphs": self.num_graphs,
            "seed": self.seed,
        }


@dataclass
class ExperimentConfig:
    """Resolved experiment settings plus where each CLI-overridable value came from."""

    dataset: DatasetSource = field(default_factory=DatasetSource)
    architecture: str = "graphsage"
    modes: tuple[str, ...] = MODES
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    output_dir: Path = Path("runs/experiment")
    base: TrainConfig = field(default_factory=TrainConfig)
    grid: HyperparameterGrid = field(default_factory=HyperparameterGrid)
    jobs: int = 1
    source_path: Path | None = None

    output_dir_source: str = "Default"
    modes_source: str = "Default"
    jobs_source: str = "Default"

    def snapshot(self) -> dict[str, Any]:
        """JSON-ready copy of everything that determines the trials."""
        return {
            "version": CONFIG_VERSION,
            "dataset": self.dataset.to_dict(),
            "architecture": self.architecture,
            "modes": list(self.modes),
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
            "base": self.base.to_dict(),
            "grid": {name: list(getattr(self.grid, name)) for name in self.grid.__dataclass_fields__},
        }


def _checked(value: Any, types: tuple[type, ...], field_name: str) -> Any:
    if isinstance(value, bool) or not isinstance(value, types):
        expected = " or ".join(t.__name__ for t in types)
        raise InvalidConfigurationError(
            f"{field_name} must be {expected}, got {type(value).__name__}", field=field_name
        )
    return value


def _section(document: dict[str, Any], name: str) -> dict[str, Any]:
    section = document.get(name, {})
    if not isinstance(section, dict):
        raise InvalidConfigurationError(f"[{name}] must be a table", field=name)
    allowed = _CONFIG_KEYS[name]
    for key, value in section.items():
        if key not in allowed:
            raise InvalidConfigurationError(
                f"Unknown key '{key}' in [{name}]", field=f"{name}.{key}", details=f"allowed: {', '.join(allowed)}"
            )
        _checked(value, allowed[key], f"{name}.{key}")
    return section


def _grid_from(section: dict[str, Any]) -> HyperparameterGrid:
    values: dict[str, tuple[Any, ...]] = {}
    for key, items in section.items():
        if not items:
            raise InvalidConfigurationError(f"grid.{key} must not be empty", field=f"grid.{key}")
        checked = [_checked(v, _GRID_ITEM_TYPES[key], f"grid.{key}") for v in items]
        values[key] = tuple(float(v) for v in checked) if key == "margin" else tuple(checked)
    return HyperparameterGrid(**values)


def _resolve_path(raw: str, base_dir: Path) -> Path:
    path = Path(raw).expanduser()
    return path if path.is_absolute() else base_dir / path


def parse_experiment_config(document: dict[str, Any], base_dir: Path) -> ExperimentConfig:
    """Validate a parsed TOML document and build an ExperimentConfig.

    Relative paths are resolved against ``base_dir``.

    Raises:
        InvalidConfigurationError: unknown key, wrong type or value outside its space
    """
    version = document.get("version")
    if version != CONFIG_VERSION:
        raise InvalidConfigurationError(
            f"Unsupported configuration version {version!r}", field="version", details=f"expected {CONFIG_VERSION}"
        )
    unknown = sorted(set(document) - set(_CONFIG_KEYS) - {"version"})
    if unknown:
        raise InvalidConfigurationError(f"Unknown section [{unknown[0]}]", field=unknown[0])

    ds = _section(document, "dataset")
    dataset = DatasetSource(
        kind=ds.get("kind", "synthetic"),
        path=_resolve_path(ds["path"], base_dir) if "path" in ds else None,
        name=ds.get("name"),
        zone_count=ds.get("zone_count"),
        num_graphs=ds.get("num_graphs", 200),
        seed=ds.get("seed", 0),
    )

    ex = _section(document, "experiment")
    modes_raw = [_checked(m, (str,), "experiment.modes") for m in ex.get("modes", list(MODES))]
    modes = _normalize_modes(modes_raw, "experiment.modes")
    seeds = tuple(_checked(s, (int,), "experiment.seeds") for s in ex.get("seeds", list(DEFAULT_SEEDS)))
    if len(seeds) < 2:
        raise InvalidConfigurationError("experiment.seeds needs at least two seeds", field="experiment.seeds")
    if len(set(seeds)) != len(seeds):
        raise InvalidConfigurationError("experiment.seeds contains duplicates", field="experiment.seeds")
    output_dir = _resolve_path(ex.get("output_dir", "runs/experiment"), base_dir)

    tr = _section(document, "training")
    md = _section(document, "model")
    grid = _grid_from(_section(document, "grid"))

    try:
        model = ModelConfig(
            architecture=ex.get("architecture", "graphsage"),
            num_layers=grid.num_layers[0],
            input_dim=grid.input_dim[0],
            hidden_dim=grid.hidden_dim[0],
            output_dim=grid.output_dim[0],
            global_pool=grid.global_pool[0],
            gat_heads=md.get("gat_heads", 4),
            diffpool_clusters=md.get("diffpool_clusters"),
            sagpool_ratio=float(md.get("sagpool_ratio", 0.5)),
        )
        base = TrainConfig(
            mode=modes[0],
            margin=grid.margin[0],
            lr=float(tr.get("lr", 1e-3)),
            max_epochs=tr.get("max_epochs", 100),
            stage1_max_epochs=tr.get("stage1_max_epochs", 200),
            patience=tr.get("patience", 20),
            model=model,
            classifier=ClassifierConfig(),
        )
    except InvalidConfigurationError as e:
        section = "experiment" if e.field == "architecture" else "model" if e.field in md else "training"
        raise InvalidConfigurationError(e.message, field=f"{section}.{e.field}", details=e.details) from e

    for mode in modes:
        if not grid.expand(mode, base):
            raise InvalidConfigurationError(
                f"grid expands to no valid configuration for mode {mode}",
                field="grid.classifier_hidden",
                details="classifier_hidden must be a power of two not above output_dim",
            )

    return ExperimentConfig(
        dataset=dataset,
        architecture=model.architecture,
        modes=modes,
        seeds=seeds,
        output_dir=output_dir,
        base=base,
        grid=grid,
        output_dir_source="Config file",
        modes_source="Config file",
    )


def _normalize_modes(modes: Sequence[str], field_name: str) -> tuple[str, ...]:
    if not modes:
        raise InvalidConfigurationError("at least one mode is required", field=field_name)
    if "all" in (m.strip().lower() for m in modes):
        return MODES
    try:
        normalized = [normalize_mode(m) for m in modes]
    except InvalidConfigurationError as e:
        raise InvalidConfigurationError(e.message, field=field_name, details=e.details) from e
    return tuple(m for m in MODES if m in normalized)


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Read and validate an experiment TOML file.

    Raises:
        InvalidConfigurationError: missing file, TOML syntax error or invalid value
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    except FileNotFoundError as e:
        raise InvalidConfigurationError("Configuration file not found", field="--config", details=str(path)) from e
    except tomllib.TOMLDecodeError as e:
        raise InvalidConfigurationError("Configuration file is not valid TOML", details=str(e)) from e
    config = parse_experiment_config(document, path.parent)
    config.source_path = path
    return config


def resolve_experiment(
    config_path: Path,
    output_dir: Path | None = None,
    mode: str | None = None,
    jobs: int | None = None,
) -> ExperimentConfig:
    """Load ``config_path`` and apply CLI overrides (CLI > config file > defaults)."""
    config = load_experiment_config(config_path)

    if output_dir is not None:
        config.output_dir = Path(output_dir)
        config.output_dir_source = "CLI"
    if mode is not None:
        config.modes = _normalize_modes([mode], "--mode")
        config.base = replace(config.base, mode=config.modes[0])
        config.modes_source = "CLI"
    if jobs is not None:
        if jobs < 1:
            raise InvalidConfigurationError("--jobs must be at least 1", field="--jobs")
        config.jobs = jobs
        config.jobs_source = "CLI"
    return config


# ============================================================================
# Trial planning and execution
# ============================================================================


def dataset_fingerprint(dataset: GraphDataset) -> str:
    return stable_digest(dataset_to_dict(dataset))


def trial_id(fingerprint: str, config: TrainConfig) -> str:
    """Identity of a trial: digest of the dataset, the full config, its seed and mode."""
    return stable_digest({"dataset": fingerprint, "config": config.to_dict()})


@dataclass(frozen=True)
class PlannedTrial:
    trial_id: str
    config: TrainConfig


@dataclass
class TrialArtifacts:
    """Everything a finished trial persists; plain data so it can cross process boundaries."""

    trial_id: str
    record: dict[str, Any]
    checkpoint: dict[str, Any]
    embeddings: dict[str, Any]


def plan_trials(config: ExperimentConfig, fingerprint: str) -> list[PlannedTrial]:
    """Every (mode, grid point, seed) in a fixed order."""
    planned: list[PlannedTrial] = []
    for mode in config.modes:
        for setting in config.grid.expand(mode, replace(config.base, mode=mode)):
            for seed in config.seeds:
                trial_config = setting.with_seed(seed)
                planned.append(PlannedTrial(trial_id(fingerprint, trial_config), trial_config))
    return planned


def group_trials(planned: Sequence[PlannedTrial]) -> list[list[PlannedTrial]]:
    """Group trials sharing a Stage-1 result (2stg and 2stg+ of one config and seed).

    Groups keep the order of their first member.
    """
    groups: dict[str, list[PlannedTrial]] = {}
    for trial in planned:
        key = trial.trial_id if trial.config.mode == "original" else f"stage1:{trial.config.stage1_key()}"
        groups.setdefault(key, []).append(trial)
    return list(groups.values())


def _iter_group(
    dataset: GraphDataset,
    group: Sequence[PlannedTrial],
    output: Output,
) -> Iterator[TrialArtifacts]:
    cache: dict[str, Stage1Result] = {}
    for planned in group:
        result = run_trial(dataset, planned.config, stage1_cache=cache, output=output)
        assert result.model is not None and result.head is not None
        record = result.to_record()
        record.update(
            {
                "trial_id": planned.trial_id,
                "dataset": dataset.name,
                "checkpoint": f"checkpoints/{planned.trial_id}.json",
                "embeddings": f"embeddings/{planned.trial_id}.json",
            }
        )
        yield TrialArtifacts(
            trial_id=planned.trial_id,
            record=record,
            checkpoint=checkpoint_payload(result.model, result.head, trial_id=planned.trial_id),
            embeddings={
                "trial_id": planned.trial_id,
                "indices": result.val_indices,
                "labels": result.val_labels,
                "embeddings": result.val_embeddings.tolist(),
            },
        )


def _execute_group(
    dataset: GraphDataset,
    group: list[PlannedTrial],
    output_config: OutputConfig,
) -> list[TrialArtifacts]:
    """Process-pool entry point: run one group in a worker."""
    output = configure_output(replace(output_config, verbose=False))
    return list(_iter_group(dataset, group, output))


@dataclass
class RunOutcome:
    planned: int
    skipped: int
    executed: int
    manifest_path: Path


class ExperimentRunner:
    """Runs an experiment's pending trials and maintains its run directory.

    Layout of ``config.output_dir``::

        trials.jsonl              one JSON record per finished trial
        checkpoints/<id>.json     model + classifier parameters
        embeddings/<id>.json      validation embeddings of the selected checkpoint
        manifest.json             rebuilt from the log after every run
    """

    def __init__(
        self,
        config: ExperimentConfig,
        dataset: GraphDataset | None = None,
        output: Output | None = None,
        on_trial_complete: Callable[[dict[str, Any]], None] | None = None,
    ) -> None:
        self.config = config
        self.output = output or get_output()
        self.dataset = dataset if dataset is not None else config.dataset.load()
        self.fingerprint = dataset_fingerprint(self.dataset)
        self.on_trial_complete = on_trial_complete

    @property
    def run_dir(self) -> Path:
        return self.config.output_dir

    @property
    def log_path(self) -> Path:
        return self.run_dir / TRIAL_LOG

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / MANIFEST_FILE

    def plan(self) -> list[PlannedTrial]:
        return plan_trials(self.config, self.fingerprint)

    def completed_ids(self) -> set[str]:
        """Trial ids with a log record whose checkpoint and embeddings exist."""
        return {
            str(r["trial_id"])
            for r in read_jsonl(self.log_path)
            if (self.run_dir / str(r.get("checkpoint", ""))).is_file()
            and (self.run_dir / str(r.get("embeddings", ""))).is_file()
        }

    def run(self) -> RunOutcome:
        """Run every pending trial, then rewrite the manifest."""
        out = self.output
        self.run_dir.mkdir(parents=True, exist_ok=True)
        repair_jsonl(self.log_path)

        planned = self.plan()
        done = self.completed_ids()
        pending = [p for p in planned if p.trial_id not in done]
        skipped = len(planned) - len(pending)
        if skipped:
            out.log("⏭️", f"Skipping {skipped} completed trial(s)")

        groups = group_trials(pending)
        executed = 0
        total = len(pending)
        if self.config.jobs > 1 and len(groups) > 1:
            with ProcessPoolExecutor(max_workers=self.config.jobs) as pool:
                futures = [pool.submit(_execute_group, self.dataset, g, out.config) for g in groups]
                for future in futures:
                    for artifacts in future.result():
                        executed += 1
                        self._persist(artifacts, executed, total)
        else:
            for group in groups:
                for artifacts in _iter_group(self.dataset, group, out):
                    executed += 1
                    self._persist(artifacts, executed, total)

        self.write_manifest()
        return RunOutcome(len(planned), skipped, executed, self.manifest_path)

    def _persist(self, artifacts: TrialArtifacts, n: int, total: int) -> None:
        record = artifacts.record
        record["timing"]["finished_at"] = _timestamp()
        write_json(self.run_dir / record["checkpoint"], artifacts.checkpoint)
        write_json(self.run_dir / record["embeddings"], artifacts.embeddings)
        append_jsonl(self.log_path, record)
        self.output.trial_done(n, total, record)
        if self.on_trial_complete is not None:
            self.on_trial_complete(record)

    def write_manifest(self) -> dict[str, Any]:
        """Rebuild ``manifest.json`` from the trial log.

        Raises:
            ArtifactError: a logged trial references a missing file
        """
        from .. import __version__

        records = read_jsonl(self.log_path)
        trials: list[dict[str, Any]] = []
        for number, record in enumerate(records, 1):
            for key in ("checkpoint", "embeddings"):
                if not (self.run_dir / str(record[key])).is_file():
                    raise ArtifactError(
                        f"Trial {record['trial_id']} references a missing {key}", file_path=self.run_dir / record[key]
                    )
            trials.append(
                {
                    "trial_id": record["trial_id"],
                    "mode": record["mode"],
                    "seed": record["seed"],
                    "setting_key": record["setting_key"],
                    "checkpoint": record["checkpoint"],
                    "embeddings": record["embeddings"],
                    "log_line": number,
                }
            )

        manifest = {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "code_version": __version__,
            "written_at": _timestamp(),
            "config": self.config.snapshot(),
            "dataset": {"name": self.dataset.name, "fingerprint": self.fingerprint, "graphs": len(self.dataset)},
            "trial_log": TRIAL_LOG,
            "trials": trials,
            "summary": summarize_records(records, expected=len(self.config.seeds)),
        }
        write_json(self.manifest_path, manifest)
        return manifest


def _timestamp() -> str:
    return datetime.now(UTC).isoformat(timespec="seconds")


# ============================================================================
# Summaries and report
# ============================================================================


def _mean_of(values: Sequence[float | None]) -> float | None:
    present = [float(v) for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _group_key(record: dict[str, Any]) -> tuple[str, str, str]:
    return str(record["dataset"]), str(record["architecture"]), str(record["mode"])


def _grouped(records: Sequence[dict[str, Any]]) -> dict[tuple[str, str, str], list[dict[str, Any]]]:
    groups: dict[tuple[str, str, str], list[dict[str, Any]]] = {}
    for record in records:
        groups.setdefault(_group_key(record), []).append(record)
    return dict(sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], MODES.index(kv[0][2]))))


def summarize_records(records: Sequence[dict[str, Any]], expected: int = len(DEFAULT_SEEDS)) -> list[dict[str, Any]]:
    """One row per (dataset, architecture, mode) holding a setting with all ``expected`` splits.

    The setting with the highest mean validation accuracy is selected; its
    trials supply every averaged column.
    """
    rows: list[dict[str, Any]] = []
    for (dataset, architecture, mode), group in _grouped(records).items():
        selected = select_setting(group, expected=expected)
        if selected is None:
            continue
        members = sorted(
            (r for r in group if r["setting_key"] == selected.setting_key), key=lambda r: int(r["seed"])
        )
        final_correlations = [r["correlation_trace"][-1] if r["correlation_trace"] else None for r in members]
        rows.append(
            {
                "dataset": dataset,
                "architecture": architecture,
                "mode": mode,
                "accuracy": format_mean_std(selected.test_mean, selected.test_std),
                "test_mean": selected.test_mean,
                "test_std": selected.test_std,
                "val_mean": selected.val_mean,
                "test_accuracies": list(selected.test_accuracies),
                "intrinsic_dimension": _mean_of([r["intrinsic_dimension"] for r in members]),
                "avg_abs_correlation": _mean_of([r["avg_abs_correlation"] for r in members]),
                "final_correlation": _mean_of(final_correlations),
                "separation_ratio": _mean_of([r["separation_ratio"] for r in members]),
                "setting_key": selected.setting_key,
                "config": selected.config,
                "trial_ids": [r["trial_id"] for r in members],
            }
        )
    return rows


def partial_groups(records: Sequence[dict[str, Any]], expected: int = len(DEFAULT_SEEDS)) -> list[dict[str, Any]]:
    """Groups without any complete setting, with their per-setting seed counts."""
    partial: list[dict[str, Any]] = []
    for (dataset, architecture, mode), group in _grouped(records).items():
        if select_setting(group, expected=expected) is not None:
            continue
        counts: dict[str, int] = {}
        for r in group:
            counts[str(r["setting_key"])] = counts.get(str(r["setting_key"]), 0) + 1
        partial.append(
            {"dataset": dataset, "architecture": architecture, "mode": mode, "trials_per_setting": counts}
        )
    return partial


def configured_seed_count(run_dir: Path) -> int:
    """Seeds listed in the manifest's config snapshot, or the default five."""
    manifest_path = Path(run_dir) / MANIFEST_FILE
    if not manifest_path.is_file():
        return len(DEFAULT_SEEDS)
    seeds = read_json(manifest_path).get("config", {}).get("seeds")
    return len(seeds) if seeds else len(DEFAULT_SEEDS)


@dataclass
class RunReport:
    summary: list[dict[str, Any]]
    partial: list[dict[str, Any]]
    written: list[Path] = field(default_factory=list)


def _csv_cell(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return "" if value is None else value


def build_report(
    run_dir: Path,
    plots: bool = False,
    output: Output | None = None,
    expected: int | None = None,
) -> RunReport:
    """Recompute the summary from ``trials.jsonl`` and write the report artifacts.

    ``expected`` defaults to the seed count recorded in the run manifest.
    Writes ``summary.csv`` and ``report.json`` at the run root and, per
    complete setting, ``analysis/<dataset>__<architecture>__<mode>/`` holding
    the analysis of the lowest-seed trial's validation embeddings.

    Raises:
        DomainError: the run holds no setting with all ``expected`` splits
    """
    out = output or get_output()
    run_dir = Path(run_dir)
    records = read_jsonl(run_dir / TRIAL_LOG)
    if expected is None:
        expected = configured_seed_count(run_dir)
    summary = summarize_records(records, expected=expected)
    partial = partial_groups(records, expected=expected)

    for group in partial:
        counts = ", ".join(f"{n} trial(s)" for n in group["trials_per_setting"].values())
        out.warning(f"Partial results for {group['dataset']}/{group['architecture']}/{group['mode']}: {counts}")
    if not summary:
        raise DomainError(
            f"No setting with all {expected} splits in {run_dir}", details=f"{len(records)} trial record(s)"
        )

    report = RunReport(summary, partial)
    by_id = {r["trial_id"]: r for r in records}
    traces: dict[tuple[str, str], dict[str, list[float]]] = {}

    for row in summary:
        first = by_id[row["trial_ids"][0]]
        payload = read_json(run_dir / first["embeddings"])
        embeddings = np.asarray(payload["embeddings"], dtype=np.float64)
        directory = run_dir / "analysis" / f"{row['dataset']}__{row['architecture']}__{row['mode']}"
        traces.setdefault((row["dataset"], row["architecture"]), {})[row["mode"]] = list(first["correlation_trace"])
        if embeddings.ndim != 2 or embeddings.shape[0] < 2:
            out.warning(f"Too few validation embeddings to analyse {directory.name}")
            continue

        analysis = analyze_embeddings(embeddings, payload["labels"], accuracies=row["test_accuracies"])
        analysis.extra.update(
            {
                "trial_id": first["trial_id"],
                "seed": first["seed"],
                "setting_key": row["setting_key"],
                "intrinsic_dimension_mean": row["intrinsic_dimension"],
                "avg_abs_correlation_mean": row["avg_abs_correlation"],
            }
        )
        scatter = export_scatter_2d(embeddings, payload["labels"])
        report.written.extend(write_analysis(analysis, scatter, first["correlation_trace"], directory))
        if plots:
            title = f"{row['dataset']} {row['architecture']} {row['mode']}"
            report.written.extend(render_plots(scatter, {}, directory, title=title))

    if plots:
        for (dataset, architecture), by_mode in traces.items():
            directory = run_dir / "analysis" / f"{dataset}__{architecture}"
            report.written.extend(render_plots(None, by_mode, directory, title=f"{dataset} {architecture}"))

    summary_path = run_dir / SUMMARY_FILE
    write_csv(summary_path, SUMMARY_COLUMNS, [[_csv_cell(row[c]) for c in SUMMARY_COLUMNS] for row in summary])
    report_path = run_dir / REPORT_FILE
    write_json(
        report_path,
        {"format": REPORT_FORMAT, "version": REPORT_VERSION, "summary": summary, "partial": partial},
    )
    report.written.extend([summary_path, report_path])
    return report
