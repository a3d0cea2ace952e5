"""
Output utilities for the twostage CLI.

Provides structured output functions for dataset statistics, result tables
and key/value blocks printed by the commands.
"""

from collections.abc import Sequence
from typing import Any


def emit_header(title: str, char: str = "=", width: int = 60) -> None:
    """Emit a section header.

    Args:
        title: Header title
        char: Character to use for separator line
        width: Width of separator line
    """
    print(title)
    print(char * width)


def emit_key_value(data: dict[str, Any], indent: int = 0) -> None:
    """Emit a dictionary as key-value pairs with aligned values."""
    if not data:
        return
    prefix = " " * indent
    width = max(len(key) for key in data)
    for key, value in data.items():
        print(f"{prefix}{key + ':':<{width + 1}} {value}")


def emit_table(headers: Sequence[str], rows: Sequence[Sequence[Any]], indent: int = 0) -> None:
    """Emit rows as a left-aligned plain-text table."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    prefix = " " * indent
    for n, row in enumerate(cells):
        print(prefix + "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if n == 0:
            print(prefix + "  ".join("-" * w for w in widths))


def format_mean_std(mean: float, std: float, digits: int = 3) -> str:
    """Format an accuracy summary, e.g. ``0.800 ± 0.000``."""
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


def format_seconds(seconds: float) -> str:
    """Format a duration as ``12.3s``, ``4m 05s`` or ``1h 02m``."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, secs = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes}m {secs:02d}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes:02d}m"


def format_histogram(histogram: dict[int, int]) -> str:
    """Format a class histogram as ``0: 63, 1: 125``."""
    return ", ".join(f"{label}: {count}" for label, count in sorted(histogram.items()))
