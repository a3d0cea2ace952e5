"""
Tests for twostage.core.artifacts module.
"""

import pytest

from twostage.core.artifacts import (
    append_jsonl,
    read_json,
    read_jsonl,
    repair_jsonl,
    write_csv,
    write_json,
    write_text_atomic,
)
from twostage.core.exceptions import ArtifactError, CheckpointError


@pytest.mark.unit
class TestJsonDocuments:
    """Tests for write_json/read_json."""

    def test_write_and_read(self, tmp_path):
        """Test documents are written atomically with sorted keys."""
        path = tmp_path / "nested" / "doc.json"
        write_json(path, {"b": 1, "a": 2})
        assert read_json(path) == {"a": 2, "b": 1}
        assert path.read_text(encoding="utf-8").index('"a"') < path.read_text(encoding="utf-8").index('"b"')
        assert not (path.parent / ".doc.json.tmp").exists()

    def test_missing(self, tmp_path):
        """Test a missing document raises CheckpointError."""
        with pytest.raises(CheckpointError):
            read_json(tmp_path / "absent.json")

    def test_corrupt(self, tmp_path):
        """Test an unparseable document raises CheckpointError."""
        path = tmp_path / "bad.json"
        write_text_atomic(path, "{not json")
        with pytest.raises(CheckpointError):
            read_json(path)


@pytest.mark.unit
class TestTrialLog:
    """Tests for the JSON-lines trial log."""

    def test_append_and_read(self, tmp_path):
        """Test records come back in append order."""
        path = tmp_path / "trials.jsonl"
        append_jsonl(path, {"trial_id": "a"})
        append_jsonl(path, {"trial_id": "b"})
        assert [r["trial_id"] for r in read_jsonl(path)] == ["a", "b"]

    def test_missing_log_is_empty(self, tmp_path):
        """Test a run without a log has no records."""
        assert read_jsonl(tmp_path / "trials.jsonl") == []

    def test_torn_final_line_skipped(self, tmp_path, capsys):
        """Test an interrupted append is ignored with a warning."""
        path = tmp_path / "trials.jsonl"
        path.write_text('{"trial_id": "a"}\n{"trial_id": "b', encoding="utf-8")
        assert [r["trial_id"] for r in read_jsonl(path)] == ["a"]
        assert "torn final line" in capsys.readouterr().out

    def test_corrupt_middle_line(self, tmp_path):
        """Test damage before the last line is an error."""
        path = tmp_path / "trials.jsonl"
        path.write_text('{"trial_id": "a"}\ngarbage\n{"trial_id": "c"}\n', encoding="utf-8")
        with pytest.raises(ArtifactError):
            read_jsonl(path)

    def test_repair_drops_torn_line(self, tmp_path):
        """Test repair rewrites the log so appends start cleanly."""
        path = tmp_path / "trials.jsonl"
        path.write_text('{"trial_id": "a"}\n{"trial_id": "b', encoding="utf-8")
        assert repair_jsonl(path) == 1
        append_jsonl(path, {"trial_id": "c"})
        assert [r["trial_id"] for r in read_jsonl(path)] == ["a", "c"]

    def test_repair_missing(self, tmp_path):
        """Test repairing a missing log keeps zero records."""
        assert repair_jsonl(tmp_path / "trials.jsonl") == 0


@pytest.mark.unit
class TestCsv:
    """Tests for write_csv."""

    def test_header_and_rows(self, tmp_path):
        """Test CSV layout."""
        path = tmp_path / "table.csv"
        write_csv(path, ("i", "V"), [(1, 0.5), (2, 1.0)])
        assert path.read_text(encoding="utf-8") == "i,V\n1,0.5\n2,1.0\n"
