"""
Custom exception hierarchy for twostage.

Every error raised by the library derives from TwoStageError so that the CLI
can map failures onto exit codes and print a consistent message.
"""

from pathlib import Path


class TwoStageError(Exception):
    """Base exception for all twostage errors."""

    def __init__(self, message: str, details: str | None = None) -> None:
        self.message = message
        self.details = details
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.details:
            return f"{self.message} - Details: {self.details}"
        return self.message


# ============================================================================
# Configuration Errors
# ============================================================================


class ConfigurationError(TwoStageError):
    """Base exception for configuration-related errors."""

    pass


class InvalidConfigurationError(ConfigurationError):
    """Raised when a configuration value lies outside its allowed space."""

    def __init__(
        self,
        message: str,
        field: str | None = None,
        details: str | None = None,
    ) -> None:
        self.field = field
        super().__init__(message, details)

    def __str__(self) -> str:
        base = super().__str__()
        if self.field:
            return f"{base} (Field: {self.field})"
        return base


class ShapeMismatchError(ConfigurationError):
    """Raised when operand shapes are incompatible for a tensor operation."""

    def __init__(
        self,
        kind: str,
        left: tuple[int, ...],
        right: tuple[int, ...],
        details: str | None = None,
    ) -> None:
        self.kind = kind
        self.left = left
        self.right = right
        super().__init__(f"Shape mismatch in {kind}: {left} vs {right}", details)


# ============================================================================
# Contract and Domain Errors
# ============================================================================


class ContractViolation(TwoStageError):
    """Raised when a caller breaks an operation's precondition."""

    pass


class DomainError(TwoStageError):
    """Raised when an input lies outside an operation's mathematical domain."""

    pass


class NonFiniteValueError(DomainError):
    """Raised when a forward pass produces NaN or infinite values."""

    pass


# ============================================================================
# Data Ingestion Errors
# ============================================================================


class DataError(TwoStageError):
    """Base exception for dataset ingestion errors."""

    pass


class DataFormatError(DataError):
    """Raised when an input file does not follow its expected format."""

    def __init__(
        self,
        message: str,
        file_path: Path | None = None,
        line_number: int | None = None,
        details: str | None = None,
    ) -> None:
        self.file_path = file_path
        self.line_number = line_number
        super().__init__(message, details)

    def __str__(self) -> str:
        base = super().__str__()
        if self.file_path and self.line_number is not None:
            return f"{base} (File: {self.file_path}, line {self.line_number})"
        if self.file_path:
            return f"{base} (File: {self.file_path})"
        if self.line_number is not None:
            return f"{base} (line {self.line_number})"
        return base


class DatasetFileMissingError(DataError):
    """Raised when a mandatory dataset file does not exist."""

    def __init__(self, message: str, file_path: Path, details: str | None = None) -> None:
        self.file_path = file_path
        super().__init__(message, details)

    def __str__(self) -> str:
        return f"{super().__str__()} (File: {self.file_path})"


# ============================================================================
# Artifact Errors
# ============================================================================


class ArtifactError(TwoStageError):
    """Base exception for checkpoint, cache and log persistence errors."""

    def __init__(
        self,
        message: str,
        file_path: Path | None = None,
        details: str | None = None,
    ) -> None:
        self.file_path = file_path
        super().__init__(message, details)

    def __str__(self) -> str:
        base = super().__str__()
        if self.file_path:
            return f"{base} (File: {self.file_path})"
        return base


class CheckpointError(ArtifactError):
    """Raised when a checkpoint or dataset cache cannot be read."""

    pass


class ArtifactWriteError(ArtifactError):
    """Raised when writing an artifact fails after all retries."""

    pass
