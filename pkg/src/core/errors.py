"""Exception hierarchy for the divas pipeline."""

from typing import Any, Dict, Optional


class DivasError(Exception):
    """Base class for every failure the pipeline reports to the caller."""

    exit_code: int = 4
    kind: str = "divas_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        """Initialize the error with a message and optional structured details."""
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_record(self, stage: Optional[str] = None) -> Dict[str, Any]:
        """Return a machine-readable error record."""
        return {
            "kind": self.kind,
            "message": self.message,
            "exit_code": self.exit_code,
            "stage": stage,
            "details": self.details,
        }


class ConfigError(DivasError):
    """Invalid run configuration or command-line arguments."""

    exit_code = 2
    kind = "config_error"


class IngestionError(DivasError):
    """A data file could not be read into a valid block."""

    exit_code = 3
    kind = "ingestion_error"


class RaggedInputError(IngestionError):
    """Rows of a data file have different lengths."""

    kind = "ragged_input"


class NonNumericInputError(IngestionError):
    """A data file holds cells that do not parse as finite numbers."""

    kind = "non_numeric_input"


class DomainViolationError(IngestionError):
    """Entries fall outside (0, 1) when a logit transform is requested."""

    kind = "logit_domain_violation"


class NumericError(DivasError):
    """A numerical routine received invalid input or failed."""

    exit_code = 4
    kind = "numeric_error"


class InvalidLawError(NumericError):
    """Marchenko-Pastur law parameters out of range."""

    kind = "invalid_law"


class InitializationError(NumericError):
    """Every flag-mean candidate was annihilated by the orthogonality projection."""

    kind = "initialization_failure"


class SynthesisError(NumericError):
    """A synthetic specification cannot be realized."""

    kind = "synthesis_error"
