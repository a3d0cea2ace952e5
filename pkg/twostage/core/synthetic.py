"""
Synthetic datasets for smoke runs and tests.

The clique-vs-path set is linearly separable by construction: class 0 graphs
are 5-cliques, class 1 graphs are 5-paths, and node categories are degrees.
The trip generator produces CSV-compatible records whose weekend hours favor
a different set of zones than weekday hours.
"""

import csv
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .graph_data import TRIP_CSV_HEADER, TRIP_TIMESTAMP_FORMAT, Graph, GraphDataset, TaxiTrip, hour_label

SHAPE_SIZE = 5


def _clique_edges(n: int) -> list[tuple[int, int]]:
    return [(u, v) for u in range(n) for v in range(n) if u != v]


def _path_edges(n: int) -> list[tuple[int, int]]:
    forward = [(i, i + 1) for i in range(n - 1)]
    return forward + [(v, u) for u, v in forward]


def clique_path_dataset(num_graphs: int = 200, seed: int = 0, size: int = SHAPE_SIZE) -> GraphDataset:
    """Balanced dataset of ``size``-cliques (label 0) and ``size``-paths (label 1).

    Node order is randomly relabeled per graph so that models cannot key on
    node positions.
    """
    rng = np.random.default_rng(seed)
    graphs: list[Graph] = []
    for i in range(num_graphs):
        label = i % 2
        edges = np.array(_clique_edges(size) if label == 0 else _path_edges(size), dtype=np.int64)
        degree = np.bincount(edges[:, 0], minlength=size).astype(np.int64)
        base = Graph(size, edges, degree, label, f"synthetic-{i}")
        graphs.append(base.permuted(rng.permutation(size).astype(np.int64)))

    return GraphDataset(
        name="synthetic",
        graphs=tuple(graphs),
        num_classes=2,
        num_feature_categories=size,
        provenance={"source": "synthetic", "generator": "clique_path", "seed": seed, "size": size},
        directed=False,
    )


def synthetic_trips(
    start: datetime,
    days: int,
    zone_count: int = 8,
    trips_per_hour: int = 6,
    seed: int = 0,
) -> list[TaxiTrip]:
    """Generate trips covering ``days`` full days from ``start`` (floored to midnight).

    Weekday hours draw zones from the lower half of the zone range, weekend
    hours from the upper half.
    """
    rng = np.random.default_rng(seed)
    midnight = start.replace(hour=0, minute=0, second=0, microsecond=0)
    half = max(zone_count // 2, 1)
    trips: list[TaxiTrip] = []
    for hour_index in range(days * 24):
        hour = midnight + timedelta(hours=hour_index)
        low, high = (0, half) if hour_label(hour) == 0 else (zone_count - half, zone_count)
        for _ in range(trips_per_hour):
            minute = int(rng.integers(0, 60))
            second = int(rng.integers(0, 60))
            source = int(rng.integers(low, high))
            dest = int(rng.integers(low, high))
            trips.append(TaxiTrip(hour + timedelta(minutes=minute, seconds=second), source, dest))
    return trips


def write_trip_csv(path: Path, trips: list[TaxiTrip]) -> None:
    """Write trips in the ``pickup_datetime,PULocationID,DOLocationID`` layout."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRIP_CSV_HEADER)
        for trip in trips:
            writer.writerow([trip.pickup.strftime(TRIP_TIMESTAMP_FORMAT), trip.source_zone, trip.dest_zone])
