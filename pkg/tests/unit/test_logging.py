"""
Tests for twostage.core.logging module.
"""

import logging

import pytest

from twostage.core.logging import LogLevel, Output, OutputConfig, configure_output, get_output, reset_output


@pytest.mark.unit
class TestOutputConfig:
    """Tests for OutputConfig dataclass."""

    def test_default_config(self):
        """Test default configuration values."""
        config = OutputConfig()
        assert config.use_emoji is True
        assert config.verbose is False
        assert config.indent_size == 2
        assert config.logger_name is None


@pytest.mark.unit
class TestOutputMessages:
    """Tests for Output message formatting."""

    def test_info_has_emoji_prefix(self, capsys):
        """Info lines start with the info emoji."""
        Output().info("Loaded {n} graphs", n=40)
        assert capsys.readouterr().out == f"{LogLevel.INFO.value} Loaded 40 graphs\n"

    def test_no_emoji(self, capsys):
        """Plain-text mode drops prefixes."""
        out = Output(OutputConfig(use_emoji=False))
        out.success("done")
        out.log("💾", "saved")
        out.step(1, 3, "🎯", "trial")
        assert capsys.readouterr().out == "done\nsaved\n[1/3] trial\n"

    def test_debug_hidden_unless_verbose(self, capsys):
        """Debug lines need verbose mode."""
        Output().debug("hidden")
        assert capsys.readouterr().out == ""
        Output(OutputConfig(verbose=True)).debug("shown")
        assert "shown" in capsys.readouterr().out

    def test_indentation(self, capsys):
        """indent/dedent shift messages by indent_size spaces."""
        out = Output(OutputConfig(use_emoji=False))
        out.indent()
        out.info("nested")
        out.dedent()
        out.dedent()
        out.info("top")
        assert capsys.readouterr().out == "  nested\ntop\n"


@pytest.mark.unit
class TestTrainingLines:
    """Tests for trial progress and epoch lines."""

    def test_trial_done(self, capsys):
        """Finished trials print mode, seed, accuracies and id."""
        out = Output(OutputConfig(use_emoji=False))
        record = {"mode": "2stg+", "seed": 3, "val_accuracy": 0.75, "test_accuracy": 0.8, "trial_id": "abc"}
        out.trial_done(2, 15, record)
        assert capsys.readouterr().out == "[2/15] 2stg+ seed=3 val=0.750 test=0.800 [abc]\n"

    def test_epoch_lines_only_when_verbose(self, capsys):
        """Epoch metrics are formatted with four decimals in verbose mode."""
        Output(OutputConfig(use_emoji=False)).epoch("stage1", 1, train=0.5)
        assert capsys.readouterr().out == ""
        Output(OutputConfig(use_emoji=False, verbose=True)).epoch("stage1", 3, train=0.125, val=0.2)
        assert capsys.readouterr().out == "stage1 epoch 3: train=0.1250 val=0.2000\n"

    def test_early_stop(self, capsys):
        """Early stopping is reported as a debug line."""
        Output(OutputConfig(use_emoji=False, verbose=True)).early_stop("original", 12, 4)
        assert capsys.readouterr().out == "original early stop at epoch 12 (best epoch 4)\n"


@pytest.mark.unit
class TestLoggerMirror:
    """Tests for mirroring lines to the logging module."""

    def test_warning_mirrored(self, caplog):
        """Messages reach the configured logger with their level."""
        out = Output(OutputConfig(logger_name="twostage.test"))
        with caplog.at_level(logging.INFO, logger="twostage.test"):
            out.warning("careful")
        assert any(r.levelno == logging.WARNING and r.message == "careful" for r in caplog.records)


@pytest.mark.unit
class TestGlobalOutput:
    """Tests for the global output singleton."""

    def test_get_output_is_singleton(self):
        """Repeated calls return one instance."""
        assert get_output() is get_output()

    def test_configure_replaces_instance(self):
        """configure_output installs a fresh configured instance."""
        configured = configure_output(OutputConfig(verbose=True))
        assert get_output() is configured
        assert get_output().config.verbose
        reset_output()
        assert get_output() is not configured
