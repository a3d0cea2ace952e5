"""
Console output for twostage.

One Output instance carries every line the trainers, the experiment runner
and the CLI print: emoji-prefixed status messages, ``[n/total]`` trial
progress and, in verbose mode, per-epoch training lines. Lines can be
mirrored to a standard ``logging`` logger.
"""

import logging
import sys
import traceback as tb_module
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any


class LogLevel(Enum):
    """Message kinds and their emoji prefixes."""

    DEBUG = "\U0001f50d"
    INFO = "ℹ️"
    SUCCESS = "✅"
    WARNING = "⚠️"
    ERROR = "❌"
    PROGRESS = "\U0001f4ca"


_LOG_LEVEL_MAP: dict[LogLevel, int] = {
    LogLevel.DEBUG: logging.DEBUG,
    LogLevel.INFO: logging.INFO,
    LogLevel.SUCCESS: logging.INFO,
    LogLevel.WARNING: logging.WARNING,
    LogLevel.ERROR: logging.ERROR,
    LogLevel.PROGRESS: logging.INFO,
}

# Prefixes of training-progress lines
STAGE_EMOJIS = {"stage1": "📐", "2stg": "🎯", "2stg+": "🎯", "original": "🧪"}
TRIAL_EMOJI = "🎯"


@dataclass
class OutputConfig:
    """Output settings; picklable so worker processes can rebuild the same Output."""

    use_emoji: bool = True
    verbose: bool = False
    indent_size: int = 2
    logger_name: str | None = None


class Output:
    """Formats and prints every console line of a twostage run.

    Debug and epoch lines are only shown when the configuration is verbose.
    """

    def __init__(self, config: OutputConfig | None = None):
        self.config = config or OutputConfig()
        self._indent_level = 0
        self._logger: logging.Logger | None = None
        if self.config.logger_name:
            self.configure_logging(self.config.logger_name)

    def configure_logging(self, name: str = "twostage", level: int = logging.INFO) -> None:
        """Mirror every printed line to the logger ``name`` (stderr handler added once)."""
        self._logger = logging.getLogger(name)
        self._logger.setLevel(level)
        if not self._logger.handlers:
            handler = logging.StreamHandler(sys.stderr)
            handler.setLevel(level)
            handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
            self._logger.addHandler(handler)

    def _indent(self) -> str:
        return " " * (self._indent_level * self.config.indent_size)

    def indent(self) -> None:
        self._indent_level += 1

    def dedent(self) -> None:
        if self._indent_level > 0:
            self._indent_level -= 1

    def _emit(self, prefix: str, text: str, level: int = logging.INFO) -> None:
        shown = f"{prefix} " if prefix and self.config.use_emoji else ""
        print(f"{self._indent()}{shown}{text}".rstrip())
        if self._logger:
            self._logger.log(level, text)

    def message(self, level: LogLevel, text: str, **kwargs: Any) -> None:
        """Print ``text`` (formatted with ``kwargs``) behind the level's emoji."""
        if level is LogLevel.DEBUG and not self.config.verbose:
            return
        self._emit(level.value, text.format(**kwargs) if kwargs else text, _LOG_LEVEL_MAP[level])

    def log(self, emoji: str, text: str) -> None:
        """Print a line with an arbitrary emoji prefix."""
        self._emit(emoji, text)

    def step(self, current: int, total: int, emoji: str, text: str) -> None:
        """Print ``[current/total] emoji text``."""
        shown = f"{emoji} " if emoji and self.config.use_emoji else ""
        line = f"{self._indent()}[{current}/{total}] {shown}{text}"
        print(line)
        if self._logger:
            self._logger.info(line.strip())

    def trial_done(self, current: int, total: int, record: Mapping[str, Any]) -> None:
        """Progress line for a finished trial record."""
        self.step(
            current,
            total,
            TRIAL_EMOJI,
            f"{record['mode']} seed={record['seed']} "
            f"val={record['val_accuracy']:.3f} test={record['test_accuracy']:.3f} [{record['trial_id']}]",
        )

    def epoch(self, stage: str, epoch: int, **metrics: float) -> None:
        """Verbose-only per-epoch line, e.g. ``stage1 epoch 3: train=0.1250 val=0.2000``."""
        if not self.config.verbose:
            return
        values = " ".join(f"{name}={value:.4f}" for name, value in metrics.items())
        self._emit(STAGE_EMOJIS.get(stage, "🔁"), f"{stage} epoch {epoch}: {values}", logging.DEBUG)

    def early_stop(self, stage: str, epoch: int, best_epoch: int) -> None:
        self.debug(f"{stage} early stop at epoch {epoch} (best epoch {best_epoch})")

    def traceback(self) -> None:
        """Print the current exception traceback."""
        text = tb_module.format_exc()
        print(text)
        if self._logger:
            self._logger.error(text)

    def info(self, text: str, **kwargs: Any) -> None:
        self.message(LogLevel.INFO, text, **kwargs)

    def success(self, text: str, **kwargs: Any) -> None:
        self.message(LogLevel.SUCCESS, text, **kwargs)

    def warning(self, text: str, **kwargs: Any) -> None:
        self.message(LogLevel.WARNING, text, **kwargs)

    def error(self, text: str, **kwargs: Any) -> None:
        self.message(LogLevel.ERROR, text, **kwargs)

    def debug(self, text: str, **kwargs: Any) -> None:
        self.message(LogLevel.DEBUG, text, **kwargs)


_output: Output | None = None


def get_output() -> Output:
    """Return the process-wide Output, creating a default one on first use."""
    global _output
    if _output is None:
        _output = Output()
    return _output


def configure_output(config: OutputConfig | None = None) -> Output:
    """Install a fresh process-wide Output built from ``config``."""
    global _output
    _output = Output(config)
    return _output


def reset_output() -> None:
    """Drop the process-wide Output (tests)."""
    global _output
    _output = None
