"""
Unit tests for graph data: TUDataset parsing, hourly trip graphs, splits
and the dataset cache.
"""

from datetime import datetime

import numpy as np
import pytest

from twostage.core.exceptions import (
    CheckpointError,
    ContractViolation,
    DataFormatError,
    DatasetFileMissingError,
    DomainError,
)
from twostage.core.graph_data import (
    DEGREE_CLAMP,
    Graph,
    GraphDataset,
    TaxiTrip,
    build_taxi_dataset,
    hour_label,
    load_dataset,
    make_splits,
    parse_tudataset,
    read_trip_csv,
    save_dataset,
)
from twostage.core.synthetic import synthetic_trips

from ..fixtures.graph_fixtures import write_triangle_tudataset, write_trip_file, write_tudataset


@pytest.mark.unit
class TestGraph:
    """Tests for the Graph value type."""

    def test_neighbors_follow_edge_direction(self):
        """N(v) holds the sources of edges into v."""
        graph = Graph(3, np.array([(0, 2), (1, 2), (2, 0)]), np.zeros(3), 0, "g")
        assert sorted(graph.neighbors_of(2).tolist()) == [0, 1]
        assert graph.neighbors_of(1).tolist() == []
        assert graph.adjacency[2, 0] == 1.0
        assert graph.in_degree.tolist() == [1, 0, 2]

    def test_mean_adjacency_rows(self):
        """Rows with neighbors sum to one; isolated nodes stay zero."""
        graph = Graph(3, np.array([(0, 1), (2, 1)]), np.zeros(3), 0, "g")
        np.testing.assert_allclose(graph.mean_adjacency.sum(axis=1), [0.0, 1.0, 0.0])

    def test_edge_endpoint_out_of_range(self):
        """Edges must reference existing nodes."""
        with pytest.raises(ContractViolation):
            Graph(2, np.array([(0, 2)]), np.zeros(2), 0, "bad")

    def test_permuted_preserves_structure(self, path_graph):
        """Relabeling keeps categories attached to the same structural nodes."""
        permuted = path_graph.permuted(np.array([3, 2, 1, 0]))
        assert permuted.node_categories.tolist() == [3, 2, 1, 0]
        assert permuted.edge_count == path_graph.edge_count


@pytest.mark.unit
class TestGraphDataset:
    """Tests for dataset-level label invariants."""

    def test_every_class_must_occur(self):
        """A declared class without any graph is rejected."""
        graphs = [Graph(1, np.zeros((0, 2)), np.zeros(1), 0, f"g{i}") for i in range(3)]
        with pytest.raises(ContractViolation, match=r"no graph has label \[1\]"):
            GraphDataset("one-class", tuple(graphs), num_classes=2, num_feature_categories=1)

    def test_all_classes_present(self):
        """Datasets covering every class construct normally."""
        graphs = [Graph(1, np.zeros((0, 2)), np.zeros(1), i % 2, f"g{i}") for i in range(4)]
        dataset = GraphDataset("two-class", tuple(graphs), num_classes=2, num_feature_categories=1)
        assert dataset.labels.tolist() == [0, 1, 0, 1]


@pytest.mark.unit
class TestParseTudataset:
    """Tests for parse_tudataset."""

    def test_triangle(self, tmp_path):
        """One triangle listed one way becomes 6 directed edge entries."""
        directory = write_triangle_tudataset(tmp_path)
        dataset = parse_tudataset(directory, "TRIANGLE")
        assert len(dataset) == 1
        graph = dataset.graphs[0]
        assert graph.node_count == 3
        assert graph.edge_count == 6
        assert graph.label == 0
        assert dataset.provenance["label_map"] == {"1": 0}
        assert graph.graph_id == "TRIANGLE-1"

    def test_degree_categories_without_node_labels(self, tmp_path):
        """Missing node labels fall back to clamped degrees."""
        directory = write_triangle_tudataset(tmp_path)
        dataset = parse_tudataset(directory, "TRIANGLE")
        assert dataset.graphs[0].node_categories.tolist() == [2, 2, 2]
        assert dataset.num_feature_categories == DEGREE_CLAMP + 1
        assert dataset.provenance["node_categories"] == "clamped_degree"

    def test_node_labels_and_label_remapping(self, tmp_path):
        """Raw labels {-1, 1} map to {0, 1} and node labels become categories."""
        directory = write_tudataset(
            tmp_path,
            "TWO",
            [
                ([(0, 1)], -1, [0, 3]),
                ([(0, 1), (1, 2)], 1, [1, 1, 2]),
            ],
        )
        dataset = parse_tudataset(directory, "TWO")
        assert dataset.labels.tolist() == [0, 1]
        assert dataset.num_classes == 2
        assert dataset.num_feature_categories == 4
        assert dataset.graphs[1].node_categories.tolist() == [1, 1, 2]
        assert dataset.stats().class_histogram == {0: 1, 1: 1}

    def test_stats(self, tmp_path):
        """Edge counts are reported per undirected edge."""
        directory = write_triangle_tudataset(tmp_path)
        stats = parse_tudataset(directory, "TRIANGLE").stats()
        assert stats.num_graphs == 1
        assert stats.mean_nodes == 3.0
        assert stats.mean_edges == 3.0
        assert stats.max_nodes == 3

    def test_missing_file_is_named(self, tmp_path):
        """A missing mandatory file raises with its path."""
        directory = write_triangle_tudataset(tmp_path)
        (directory / "TRIANGLE_graph_labels.txt").unlink()
        with pytest.raises(DatasetFileMissingError) as exc_info:
            parse_tudataset(directory, "TRIANGLE")
        assert "TRIANGLE_graph_labels.txt" in str(exc_info.value)

    def test_edge_across_graphs(self, tmp_path):
        """An edge joining two graphs is a format error with its line number."""
        directory = write_tudataset(tmp_path, "X", [([(0, 1)], 0, None), ([(0, 1)], 1, None)])
        with open(directory / "X_A.txt", "a", encoding="utf-8") as f:
            f.write("2, 3\n")
        with pytest.raises(DataFormatError) as exc_info:
            parse_tudataset(directory, "X")
        assert exc_info.value.line_number == 3

    def test_malformed_line(self, tmp_path):
        """Non-integer entries are reported with file and line."""
        directory = write_triangle_tudataset(tmp_path)
        (directory / "TRIANGLE_A.txt").write_text("1, 2\nfoo, 3\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as exc_info:
            parse_tudataset(directory, "TRIANGLE")
        assert "line 2" in str(exc_info.value)

    def test_mutag_statistics(self, mutag_dir):
        """MUTAG has 188 graphs, 2 classes and about 17.93 nodes per graph."""
        stats = parse_tudataset(mutag_dir, "MUTAG").stats()
        assert stats.num_graphs == 188
        assert stats.num_classes == 2
        assert stats.mean_nodes == pytest.approx(17.93, abs=0.01)


@pytest.mark.unit
class TestTaxiDataset:
    """Tests for trip records turned into hourly graphs."""

    def test_weekend_hour(self):
        """Two Friday trips in the same hour make a 2-edge weekend graph."""
        trips = [
            TaxiTrip(datetime(2019, 1, 3, 23, 30), 0, 4),
            TaxiTrip(datetime(2019, 1, 4, 0, 5), 1, 2),
            TaxiTrip(datetime(2019, 1, 4, 0, 40), 2, 3),
        ]
        dataset = build_taxi_dataset(trips, zone_count=5)
        assert len(dataset) == 2
        assert dataset.graphs[0].label == 0
        graph = dataset.graphs[1]
        assert graph.edge_count == 2
        assert graph.label == 1
        assert graph.graph_id == "2019-01-04T00"
        assert graph.node_categories.tolist() == [0, 1, 2, 3, 4]
        assert dataset.directed

    def test_two_full_days(self):
        """Trips over Thursday and Friday give 48 graphs of both classes."""
        dataset = build_taxi_dataset(synthetic_trips(datetime(2019, 1, 3), days=2, trips_per_hour=1))
        assert len(dataset) == 48
        assert dataset.stats().class_histogram == {0: 24, 1: 24}

    @pytest.mark.parametrize(
        ("first", "last"),
        [(datetime(2019, 1, 7, 9, 5), datetime(2019, 1, 8, 9, 5)), (datetime(2019, 1, 5, 9), datetime(2019, 1, 6, 22))],
    )
    def test_single_day_type_span(self, first, last):
        """Spans without both weekday and weekend hours have a missing class."""
        with pytest.raises(DomainError, match="cover only"):
            build_taxi_dataset([TaxiTrip(first, 0, 1), TaxiTrip(last, 1, 0)])

    def test_january(self):
        """Trips spanning all of January give 744 hourly graphs."""
        trips = [TaxiTrip(datetime(2019, 1, 1, 0, 0), 0, 1), TaxiTrip(datetime(2019, 1, 31, 23, 59), 1, 0)]
        dataset = build_taxi_dataset(trips)
        assert len(dataset) == 744
        # Hours without trips are kept as edgeless graphs
        assert dataset.graphs[1].edge_count == 0

    def test_hour_labels(self):
        """Mon-Thu are weekdays, Fri-Sun weekend."""
        assert hour_label(datetime(2019, 1, 3, 12)) == 0  # Thursday
        assert hour_label(datetime(2019, 1, 4, 0)) == 1  # Friday
        assert hour_label(datetime(2019, 1, 6, 23)) == 1  # Sunday
        assert hour_label(datetime(2019, 1, 7, 0)) == 0  # Monday

    def test_zone_out_of_range(self):
        """Zones beyond zone_count are a format error."""
        with pytest.raises(DataFormatError):
            build_taxi_dataset([TaxiTrip(datetime(2019, 1, 1), 0, 9)], zone_count=5)

    def test_empty_trip_list(self):
        """No trips, no dataset."""
        with pytest.raises(DomainError):
            build_taxi_dataset([])

    def test_csv_round_trip(self, tmp_path):
        """The trip CSV writer and reader agree."""
        path = write_trip_file(tmp_path / "trips.csv", datetime(2019, 1, 3), days=2)
        trips = read_trip_csv(path)
        assert len(trips) == 96
        assert len(build_taxi_dataset(trips, zone_count=6)) == 48

    def test_csv_bad_timestamp(self, tmp_path):
        """Bad timestamps are reported with their line."""
        path = tmp_path / "trips.csv"
        path.write_text("pickup_datetime,PULocationID,DOLocationID\nyesterday,1,2\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as exc_info:
            read_trip_csv(path)
        assert exc_info.value.line_number == 2

    def test_csv_bad_header(self, tmp_path):
        """The header must name the three expected columns."""
        path = tmp_path / "trips.csv"
        path.write_text("a,b,c\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            read_trip_csv(path)


@pytest.mark.unit
class TestMakeSplits:
    """Tests for make_splits."""

    def test_sizes_for_188(self):
        """floor(0.1 n) graphs each for validation and test."""
        plan = make_splits(188, seed=3)
        assert (len(plan.train_indices), len(plan.val_indices), len(plan.test_indices)) == (152, 18, 18)

    def test_smallest_legal(self):
        """n = 10 splits 8/1/1."""
        plan = make_splits(10, seed=0)
        assert (len(plan.train_indices), len(plan.val_indices), len(plan.test_indices)) == (8, 1, 1)

    def test_partition_and_determinism(self):
        """Splits cover every index once and repeat for the same seed."""
        plan = make_splits(57, seed=4)
        combined = sorted(plan.train_indices + plan.val_indices + plan.test_indices)
        assert combined == list(range(57))
        assert make_splits(57, seed=4) == plan
        assert make_splits(57, seed=5) != plan

    def test_too_small(self):
        """Fewer than 10 graphs cannot be split."""
        with pytest.raises(DomainError):
            make_splits(9, seed=0)


@pytest.mark.unit
class TestDatasetCache:
    """Tests for save_dataset/load_dataset."""

    def test_round_trip(self, tmp_path, synthetic_dataset):
        """A saved dataset loads back equal."""
        path = tmp_path / "synthetic.dataset.json"
        save_dataset(synthetic_dataset, path)
        assert load_dataset(path) == synthetic_dataset

    def test_wrong_header(self, tmp_path):
        """Files without the cache header are rejected."""
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x"}\n', encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_dataset(path)

    def test_missing(self, tmp_path):
        """Missing caches raise DatasetFileMissingError."""
        with pytest.raises(DatasetFileMissingError):
            load_dataset(tmp_path / "absent.json")
