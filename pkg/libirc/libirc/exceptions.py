class IRCError(Exception):
    """Base class for all libirc errors."""


class CorpusError(IRCError):
    """Exception raised for data-model violations."""


class IngestionError(CorpusError):
    """Exception raised when an input file cannot be ingested."""

    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"Cannot ingest '{path}': {reason}")


class ConfigError(IRCError):
    """Exception raised for invalid configuration values or keys."""


class PackingError(IRCError):
    """Exception raised when an input cannot be packed into a token sequence."""


class EncoderError(IRCError):
    """Exception raised for invalid encoder inputs."""


class DatasetBuildError(IRCError):
    """Exception raised while building a derived dataset."""


class TrainingError(IRCError):
    """Base class for training errors."""


class EmptyDatasetError(TrainingError):
    """Exception raised when training is requested on an empty dataset."""

    def __init__(self, stage: str) -> None:
        super().__init__(f"Cannot run '{stage}' on an empty dataset")


class TrainingDivergedError(TrainingError):
    """Exception raised when a loss becomes NaN or infinite."""

    def __init__(self, stage: str, example_ids: list[str]) -> None:
        self.example_ids = example_ids
        super().__init__(f"Loss diverged during '{stage}' on examples {example_ids}")


class CheckpointError(IRCError):
    """Exception raised for unreadable or mismatched checkpoints."""


class CheckpointNotFoundError(CheckpointError):
    """Exception raised when a checkpoint file or directory is missing."""

    def __init__(self, path: str) -> None:
        super().__init__(f"No checkpoint found at '{path}'")


class InferenceError(IRCError):
    """Exception raised for invalid inference inputs."""


class EvaluationError(IRCError):
    """Exception raised for misaligned predictions and gold data."""


class SyntheticSpecError(IRCError):
    """Exception raised for synthetic corpus specs that cannot be generated."""
