"""
Graph and dataset representations.

Parses TUDataset-format benchmark directories, turns trip records into one
graph per civil-calendar hour, generates 80/10/10 splits and reads/writes
the versioned dataset cache used between ``twostage ingest`` and
``twostage train``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .artifacts import write_text_atomic
from .exceptions import (
    CheckpointError,
    ContractViolation,
    DataFormatError,
    DatasetFileMissingError,
    DomainError,
)

IntArray = NDArray[np.int64]

# Node category for graphs without node labels is min(degree, DEGREE_CLAMP)
DEGREE_CLAMP = 50

CACHE_HEADER = "# twostage-dataset v1"
TRIP_CSV_HEADER = ("pickup_datetime", "PULocationID", "DOLocationID")
TRIP_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

# Mon..Thu -> 0, Fri..Sun -> 1 (datetime.weekday(): Monday == 0)
WEEKEND_FIRST_WEEKDAY = 4


@dataclass(frozen=True, eq=False)
class Graph:
    """A labeled graph with node categories as feature-lookup keys.

    ``edges`` holds one (source, target) row per directed edge; undirected
    inputs carry both directions. Messages flow along edges, so the
    neighborhood N(v) is the set of sources of edges into v.
    """

    node_count: int
    edges: IntArray
    node_categories: IntArray
    label: int
    graph_id: str

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        categories = np.asarray(self.node_categories, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "node_categories", categories)

        if self.node_count < 0:
            raise ContractViolation(f"Graph {self.graph_id}: negative node count")
        if categories.shape[0] != self.node_count:
            raise ContractViolation(
                f"Graph {self.graph_id}: {categories.shape[0]} categories for {self.node_count} nodes"
            )
        if edges.size and (edges.min() < 0 or edges.max() >= self.node_count):
            raise ContractViolation(f"Graph {self.graph_id}: edge endpoint outside [0, {self.node_count})")
        if categories.size and categories.min() < 0:
            raise ContractViolation(f"Graph {self.graph_id}: negative node category")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.label == other.label
            and self.graph_id == other.graph_id
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.node_categories, other.node_categories)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def neighbors(self) -> tuple[IntArray, IntArray]:
        """Compressed in-neighbor form ``(offsets, sources)``.

        The in-neighbors of v are ``sources[offsets[v]:offsets[v + 1]]``.
        """
        targets = self.edges[:, 1]
        order = np.argsort(targets, kind="stable")
        counts = np.bincount(targets, minlength=self.node_count)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return offsets, self.edges[order, 0]

    def neighbors_of(self, v: int) -> IntArray:
        offsets, sources = self.neighbors
        return sources[offsets[v] : offsets[v + 1]]

    @cached_property
    def adjacency(self) -> NDArray[np.float64]:
        """Dense matrix with A[v, u] = number of edges u -> v."""
        a = np.zeros((self.node_count, self.node_count))
        np.add.at(a, (self.edges[:, 1], self.edges[:, 0]), 1.0)
        return a

    @cached_property
    def mean_adjacency(self) -> NDArray[np.float64]:
        """Row-normalized adjacency; rows of nodes without neighbors stay zero."""
        a = self.adjacency
        totals = a.sum(axis=1, keepdims=True)
        return np.divide(a, totals, out=np.zeros_like(a), where=totals > 0)

    @cached_property
    def out_degree(self) -> IntArray:
        return np.bincount(self.edges[:, 0], minlength=self.node_count).astype(np.int64)

    @cached_property
    def in_degree(self) -> IntArray:
        return np.bincount(self.edges[:, 1], minlength=self.node_count).astype(np.int64)

    def permuted(self, permutation: NDArray[np.int64]) -> Graph:
        """Relabel nodes so that old node i becomes ``permutation[i]``."""
        perm = np.asarray(permutation, dtype=np.int64)
        categories = np.empty_like(self.node_categories)
        categories[perm] = self.node_categories
        return Graph(self.node_count, perm[self.edges], categories, self.label, self.graph_id)


@dataclass(frozen=True)
class DatasetStats:
    """Table-style dataset statistics printed by ``twostage ingest``."""

    num_graphs: int
    mean_nodes: float
    mean_edges: float
    num_classes: int
    class_histogram: dict[int, int]
    num_feature_categories: int
    max_nodes: int


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """A named collection of labeled graphs."""

    name: str
    graphs: tuple[Graph, ...]
    num_classes: int
    num_feature_categories: int
    provenance: dict[str, Any] = field(default_factory=dict)
    directed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.num_classes < 1:
            raise ContractViolation(f"Dataset {self.name}: num_classes must be positive")
        for g in self.graphs:
            if not 0 <= g.label < self.num_classes:
                raise ContractViolation(f"Dataset {self.name}: label {g.label} of {g.graph_id} out of range")
            if g.node_categories.size and g.node_categories.max() >= self.num_feature_categories:
                raise ContractViolation(
                    f"Dataset {self.name}: category of {g.graph_id} exceeds {self.num_feature_categories}"
                )
        missing = sorted(set(range(self.num_classes)) - {g.label for g in self.graphs})
        if missing:
            raise ContractViolation(f"Dataset {self.name}: no graph has label {missing}")

    def __len__(self) -> int:
        return len(self.graphs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GraphDataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.num_classes == other.num_classes
            and self.num_feature_categories == other.num_feature_categories
            and self.directed == other.directed
            and self.provenance == other.provenance
            and self.graphs == other.graphs
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def labels(self) -> IntArray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @property
    def max_node_count(self) -> int:
        return max((g.node_count for g in self.graphs), default=0)

    def stats(self) -> DatasetStats:
        n = len(self.graphs)
        edge_divisor = 1 if self.directed else 2
        return DatasetStats(
            num_graphs=n,
            mean_nodes=float(np.mean([g.node_count for g in self.graphs])) if n else 0.0,
            mean_edges=float(np.mean([g.edge_count / edge_divisor for g in self.graphs])) if n else 0.0,
            num_classes=self.num_classes,
            class_histogram=dict(sorted(Counter(int(g.label) for g in self.graphs).items())),
            num_feature_categories=self.num_feature_categories,
            max_nodes=self.max_node_count,
        )


@dataclass(frozen=True)
class SplitPlan:
    """A train/validation/test partition of dataset indices."""

    seed: int
    train_indices: tuple[int, ...]
    val_indices: tuple[int, ...]
    test_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        parts = (self.train_indices, self.val_indices, self.test_indices)
        total = sum(len(p) for p in parts)
        if len(set().union(*map(set, parts))) != total:
            raise ContractViolation("Split index lists overlap")


@dataclass(frozen=True)
class TaxiTrip:
    """One trip record: naive local pickup time and source/destination zones."""

    pickup: datetime
    source_zone: int
    dest_zone: int


# ============================================================================
# TUDataset parsing
# ============================================================================


def _require(path: Path) -> Path:
    if not path.is_file():
        raise DatasetFileMissingError("Required dataset file not found", file_path=path)
    return path


def _read_int_column(path: Path) -> list[int]:
    values: list[int] = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(int(text.split(",")[0].strip()))
            except ValueError as e:
                raise DataFormatError(f"Expected an integer, got {text!r}", file_path=path, line_number=number) from e
    return values


def _symmetrize(pairs: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Make a directed pair list symmetric by multiset counts.

    Each unordered pair {u, v} ends up max(count(u->v), count(v->u)) times in
    each direction, so already-symmetric inputs are unchanged.
    """
    counts: Counter[tuple[int, int]] = Counter(pairs)
    result: list[tuple[int, int]] = []
    for (u, v), c in counts.items():
        reverse = counts.get((v, u), 0)
        if u == v:
            result.extend([(u, v)] * c)
        else:
            result.extend([(u, v)] * max(c, reverse))
    for (u, v), c in counts.items():
        if (v, u) not in counts:
            result.extend([(v, u)] * c)
    result.sort()
    return result


def parse_tudataset(directory: Path, name: str) -> GraphDataset:
    """Parse a TUDataset-format benchmark directory.

    Args:
        directory: Directory holding ``{name}_A.txt`` and friends
        name: Dataset name used as the file prefix

    Returns:
        GraphDataset with contiguous labels and node categories

    Raises:
        DatasetFileMissingError: a mandatory file is absent
        DataFormatError: malformed line or edge crossing graphs
    """
    directory = Path(directory)
    adjacency_path = _require(directory / f"{name}_A.txt")
    indicator_path = _require(directory / f"{name}_graph_indicator.txt")
    labels_path = _require(directory / f"{name}_graph_labels.txt")
    node_labels_path = directory / f"{name}_node_labels.txt"

    graph_of = _read_int_column(indicator_path)
    raw_labels = _read_int_column(labels_path)
    total_nodes = len(graph_of)

    graph_ids = sorted(set(graph_of))
    if graph_ids and (graph_ids[0] < 1 or graph_ids[-1] > len(raw_labels)):
        raise DataFormatError(
            f"Graph indicator references graph {graph_ids[-1]} but only {len(raw_labels)} labels exist",
            file_path=indicator_path,
        )

    # Per-graph local node numbering in global order
    local_index = [0] * total_nodes
    members: dict[int, list[int]] = defaultdict(list)
    for node, gid in enumerate(graph_of):
        local_index[node] = len(members[gid])
        members[gid].append(node)

    edges_by_graph: dict[int, list[tuple[int, int]]] = defaultdict(list)
    with open(adjacency_path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            try:
                u, v = (int(p.strip()) - 1 for p in parts)
            except ValueError as e:
                raise DataFormatError(
                    f"Expected 'u, v' node pair, got {text!r}", file_path=adjacency_path, line_number=number
                ) from e
            if not (0 <= u < total_nodes and 0 <= v < total_nodes):
                raise DataFormatError(
                    f"Edge ({u + 1}, {v + 1}) references an unknown node", file_path=adjacency_path, line_number=number
                )
            if graph_of[u] != graph_of[v]:
                raise DataFormatError(
                    f"Edge ({u + 1}, {v + 1}) connects graphs {graph_of[u]} and {graph_of[v]}",
                    file_path=adjacency_path,
                    line_number=number,
                )
            edges_by_graph[graph_of[u]].append((local_index[u], local_index[v]))

    node_labels: list[int] | None = None
    if node_labels_path.is_file():
        node_labels = _read_int_column(node_labels_path)
        if len(node_labels) != total_nodes:
            raise DataFormatError(
                f"{len(node_labels)} node labels for {total_nodes} nodes", file_path=node_labels_path
            )
        if node_labels and min(node_labels) < 0:
            raise DataFormatError("Node labels must be non-negative", file_path=node_labels_path)

    label_values = sorted({raw_labels[gid - 1] for gid in graph_ids})
    label_map = {raw: i for i, raw in enumerate(label_values)}

    graphs: list[Graph] = []
    for gid in graph_ids:
        nodes = members[gid]
        edges = _symmetrize(edges_by_graph[gid])
        edge_array = np.array(edges, dtype=np.int64).reshape(-1, 2)
        if node_labels is not None:
            categories = np.array([node_labels[n] for n in nodes], dtype=np.int64)
        else:
            degree = np.bincount(edge_array[:, 0], minlength=len(nodes)) if len(nodes) else np.zeros(0)
            categories = np.minimum(degree, DEGREE_CLAMP).astype(np.int64)
        graphs.append(Graph(len(nodes), edge_array, categories, label_map[raw_labels[gid - 1]], f"{name}-{gid}"))

    if node_labels is not None:
        num_categories = max(node_labels, default=0) + 1
        keying = "node_label"
    else:
        num_categories = DEGREE_CLAMP + 1
        keying = "clamped_degree"

    return GraphDataset(
        name=name,
        graphs=tuple(graphs),
        num_classes=len(label_values),
        num_feature_categories=num_categories,
        provenance={
            "source": "tudataset",
            "directory": str(directory),
            "label_map": {str(raw): i for raw, i in label_map.items()},
            "node_categories": keying,
        },
        directed=False,
    )


# ============================================================================
# Trip records -> hourly graphs
# ============================================================================


def read_trip_csv(path: Path) -> list[TaxiTrip]:
    """Read a trip CSV with header ``pickup_datetime,PULocationID,DOLocationID``.

    Raises:
        DatasetFileMissingError: the file does not exist
        DataFormatError: bad header, timestamp or zone id (with line number)
    """
    path = _require(Path(path))
    trips: list[TaxiTrip] = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:3]) != TRIP_CSV_HEADER:
            raise DataFormatError(
                f"Expected header {','.join(TRIP_CSV_HEADER)}", file_path=path, line_number=1, details=str(header)
            )
        for number, row in enumerate(reader, 2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise DataFormatError(f"Expected 3 columns, got {len(row)}", file_path=path, line_number=number)
            try:
                pickup = datetime.strptime(row[0].strip(), TRIP_TIMESTAMP_FORMAT)
            except ValueError as e:
                raise DataFormatError(f"Bad timestamp {row[0]!r}", file_path=path, line_number=number) from e
            try:
                source, dest = int(row[1]), int(row[2])
            except ValueError as e:
                raise DataFormatError(f"Bad zone id in {row[1:3]}", file_path=path, line_number=number) from e
            if source < 0 or dest < 0:
                raise DataFormatError("Zone ids must be non-negative", file_path=path, line_number=number)
            trips.append(TaxiTrip(pickup, source, dest))
    return trips


def hour_label(hour: datetime) -> int:
    """Weekday (Mon-Thu) -> 0, weekend (Fri-Sun) -> 1."""
    return 0 if hour.weekday() < WEEKEND_FIRST_WEEKDAY else 1


def build_taxi_dataset(trips: list[TaxiTrip], zone_count: int | None = None, name: str = "taxi") -> GraphDataset:
    """Build one graph per civil-calendar hour between the first and last trip.

    Every graph has one node per zone (category = zone id) and one directed
    edge per trip. Hours without trips still yield edgeless graphs. Times are
    naive local civil time, so every calendar day has 24 hours.

    Raises:
        DomainError: no trips, or the hours are all weekday or all weekend
        DataFormatError: zone id outside [0, zone_count)
    """
    if not trips:
        raise DomainError("Cannot build a taxi dataset from an empty trip list")

    largest = max(max(t.source_zone, t.dest_zone) for t in trips)
    if zone_count is None:
        zone_count = largest + 1
    for t in trips:
        if not (0 <= t.source_zone < zone_count and 0 <= t.dest_zone < zone_count):
            raise DataFormatError(
                f"Zone id out of range [0, {zone_count}) in trip at {t.pickup:%Y-%m-%d %H:%M:%S}",
                details=f"source={t.source_zone}, dest={t.dest_zone}",
            )

    def floor_hour(ts: datetime) -> datetime:
        return ts.replace(minute=0, second=0, microsecond=0, tzinfo=None)

    first = floor_hour(min(t.pickup for t in trips))
    last = floor_hour(max(t.pickup for t in trips))
    hour_count = int((last - first) // timedelta(hours=1)) + 1

    per_hour: list[list[tuple[int, int]]] = [[] for _ in range(hour_count)]
    for t in sorted(trips, key=lambda trip: trip.pickup):
        slot = int((floor_hour(t.pickup) - first) // timedelta(hours=1))
        per_hour[slot].append((t.source_zone, t.dest_zone))

    categories = np.arange(zone_count, dtype=np.int64)
    graphs = []
    for slot, edges in enumerate(per_hour):
        hour = first + timedelta(hours=slot)
        graphs.append(
            Graph(
                zone_count,
                np.array(edges, dtype=np.int64).reshape(-1, 2),
                categories,
                hour_label(hour),
                hour.strftime("%Y-%m-%dT%H"),
            )
        )
    if len({g.label for g in graphs}) < 2:
        raise DomainError(
            f"Trips from {first:%Y-%m-%d %H}:00 to {last:%Y-%m-%d %H}:00 cover only "
            + ("weekend" if graphs[0].label else "weekday")
            + " hours",
            details="both Mon-Thu and Fri-Sun hours are needed for two classes",
        )

    return GraphDataset(
        name=name,
        graphs=tuple(graphs),
        num_classes=2,
        num_feature_categories=zone_count,
        provenance={
            "source": "taxi",
            "first_hour": first.strftime("%Y-%m-%dT%H"),
            "last_hour": last.strftime("%Y-%m-%dT%H"),
            "zone_count": zone_count,
            "trip_count": len(trips),
        },
        directed=True,
    )


# ============================================================================
# Splits
# ============================================================================

SPLIT_FRACTION = 0.1


def make_splits(n: int, seed: int) -> SplitPlan:
    """Random 80/10/10 partition of ``range(n)``, deterministic in (n, seed).

    Raises:
        DomainError: n < 10 (validation or test set would be empty)
    """
    if n < 10:
        raise DomainError(f"Need at least 10 graphs to split, got {n}")
    permutation = np.random.default_rng(seed).permutation(n)
    n_val = math.floor(SPLIT_FRACTION * n)
    n_test = math.floor(SPLIT_FRACTION * n)
    val = sorted(int(i) for i in permutation[:n_val])
    test = sorted(int(i) for i in permutation[n_val : n_val + n_test])
    train = sorted(int(i) for i in permutation[n_val + n_test :])
    return SplitPlan(seed, tuple(train), tuple(val), tuple(test))


# ============================================================================
# Dataset cache
# ============================================================================


def dataset_to_dict(dataset: GraphDataset) -> dict[str, Any]:
    return {
        "name": dataset.name,
        "num_classes": dataset.num_classes,
        "num_feature_categories": dataset.num_feature_categories,
        "directed": dataset.directed,
        "provenance": dataset.provenance,
        "graphs": [
            {
                "graph_id": g.graph_id,
                "label": g.label,
                "node_count": g.node_count,
                "edges": g.edges.tolist(),
                "node_categories": g.node_categories.tolist(),
            }
            for g in dataset.graphs
        ],
    }


def dataset_from_dict(payload: dict[str, Any]) -> GraphDataset:
    graphs = tuple(
        Graph(
            int(g["node_count"]),
            np.array(g["edges"], dtype=np.int64).reshape(-1, 2),
            np.array(g["node_categories"], dtype=np.int64),
            int(g["label"]),
            str(g["graph_id"]),
        )
        for g in payload["graphs"]
    )
    return GraphDataset(
        name=str(payload["name"]),
        graphs=graphs,
        num_classes=int(payload["num_classes"]),
        num_feature_categories=int(payload["num_feature_categories"]),
        provenance=dict(payload.get("provenance", {})),
        directed=bool(payload.get("directed", False)),
    )


def save_dataset(dataset: GraphDataset, path: Path) -> None:
    """Write the dataset cache: a version header line, then one JSON document."""
    body = json.dumps(dataset_to_dict(dataset), separators=(",", ":"), sort_keys=True)
    write_text_atomic(Path(path), f"{CACHE_HEADER}\n{body}\n")


def load_dataset(path: Path) -> GraphDataset:
    """Read a dataset cache written by ``save_dataset``.

    Raises:
        DatasetFileMissingError: the cache does not exist
        CheckpointError: wrong header/version or unreadable body
    """
    path = _require(Path(path))
    header, _, body = path.read_text(encoding="utf-8").partition("\n")
    if header.strip() != CACHE_HEADER:
        raise CheckpointError(
            "Not a twostage dataset cache (or unsupported version)", file_path=path, details=header[:80]
        )
    try:
        return dataset_from_dict(json.loads(body))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CheckpointError("Dataset cache is corrupt", file_path=path, details=str(e)) from e
