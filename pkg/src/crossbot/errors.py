"""Exception types shared across the pipeline."""


class CrossbotError(Exception):
    """Base class for package errors."""


class ConfigError(CrossbotError):
    """Invalid registry, schema, or pipeline configuration."""


class LabelConflictError(CrossbotError):
    """Cross-dataset duplicates disagree on the class label."""


class BalanceError(CrossbotError):
    """Class balancing preconditions violated."""


class DomainLabelError(CrossbotError):
    """Release year outside the training period; no domain label defined."""


class SummaryParseError(CrossbotError):
    """Summary sentence does not match the fixed grammar."""

    def __init__(self, message: str, bracket: str = ""):
        super().__init__(message)
        self.bracket = bracket


class SummaryClientError(CrossbotError):
    """Remote summarization failed after retries."""

    def __init__(self, message: str, last_response: str = ""):
        super().__init__(message)
        self.last_response = last_response


class EncodingError(CrossbotError):
    """Document cannot be encoded."""


class DegenerateProjectionError(CrossbotError):
    """Projection head emitted a zero vector; cannot normalize."""


class TrainingDivergedError(CrossbotError):
    """Non-finite loss encountered during optimization."""


class CheckpointError(CrossbotError):
    """Checkpoint file is malformed or version-incompatible."""


class GraphError(CrossbotError):
    """Relation graph construction or parameter mismatch."""
