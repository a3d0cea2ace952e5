"""
Artifact persistence for twostage runs.

Handles atomic JSON documents (checkpoints, manifest, reports), the
append-only trial log and plain CSV tables. Transient filesystem errors are
retried before surfacing as ArtifactWriteError.
"""

import csv
import io
import json
import os
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from tenacity import (
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from .exceptions import ArtifactError, ArtifactWriteError, CheckpointError
from .logging import get_output

_write_retry = retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=1, min=2, max=10),
    reraise=True,
)


@_write_retry
def _replace_with(path: Path, text: str) -> None:
    """Internal method with retry logic for atomic writes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


@_write_retry
def _append_to(path: Path, line: str) -> None:
    """Internal method with retry logic for log appends."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        f.write(line)
        f.flush()
        os.fsync(f.fileno())


def write_text_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it over ``path``."""
    try:
        _replace_with(path, text)
    except OSError as e:
        raise ArtifactWriteError("Failed to write artifact", file_path=path, details=str(e)) from e


def write_json(path: Path, payload: Any) -> None:
    """Atomically write ``payload`` as an indented JSON document."""
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> Any:
    """Read a JSON document written by ``write_json``.

    Raises:
        CheckpointError: the file is missing or does not parse
    """
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CheckpointError("Artifact not found", file_path=path) from e
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError("Artifact could not be read", file_path=path, details=str(e)) from e


def append_jsonl(path: Path, record: dict[str, Any]) -> None:
    """Append one self-contained JSON document as a line of ``path``."""
    line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
    try:
        _append_to(path, line)
    except OSError as e:
        raise ArtifactWriteError("Failed to append trial record", file_path=path, details=str(e)) from e


def read_jsonl(path: Path) -> list[dict[str, Any]]:
    """Read every record of a JSON-lines log.

    A torn final line (left by an interrupted append) is skipped with a
    warning; an unparseable line anywhere else is an error.

    Raises:
        ArtifactError: a line other than the last does not parse
    """
    if not path.exists():
        return []

    lines = path.read_text(encoding="utf-8").splitlines()
    records: list[dict[str, Any]] = []
    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            if number == len(lines):
                get_output().warning(f"Ignoring torn final line {number} of {path.name}")
                break
            raise ArtifactError(f"Corrupt trial log line {number}", file_path=path, details=str(e)) from e
        if not isinstance(record, dict):
            raise ArtifactError(f"Trial log line {number} is not an object", file_path=path)
        records.append(record)
    return records


def repair_jsonl(path: Path) -> int:
    """Drop a torn final line so that later appends start on a clean line.

    Returns:
        Number of records kept
    """
    if not path.exists():
        return 0
    raw = path.read_text(encoding="utf-8")
    records = read_jsonl(path)
    if (raw and not raw.endswith("\n")) or len(records) != sum(1 for line in raw.splitlines() if line.strip()):
        write_text_atomic(path, "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records))
    return len(records)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Atomically write a CSV table with a header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    write_text_atomic(path, buffer.getvalue())
