"""Training and encoder configuration records."""

import json
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from .constants import (BATCH_SIZE, E2E_EPOCHS, GUMBEL_TAU, LAMBDA_NA, LAMBDA_R, LEARNING_RATE, MAX_ANSWER_TOKENS,
                        MAX_QUERY_LENGTH, MAX_RATIONALES, MAX_SENTENCE_LENGTH, MAX_SENTENCES, MAX_SEQUENCE_LENGTH,
                        PARAGRAPH_PAIRS, PRETRAIN_EPOCHS, WEIGHT_DECAY)
from .exceptions import ConfigError


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of training and inference."""

    lambda_r: float = LAMBDA_R
    lambda_na: float = LAMBDA_NA
    tau: float = GUMBEL_TAU
    batch_size: int = BATCH_SIZE
    pretrain_epochs: int = PRETRAIN_EPOCHS
    e2e_epochs: int = E2E_EPOCHS
    learning_rate: float = LEARNING_RATE
    weight_decay: float = WEIGHT_DECAY
    n_r: int = MAX_RATIONALES
    k: int = PARAGRAPH_PAIRS
    alpha: float = 0.5
    beta: float = 0.5
    seed: int = 0
    max_sequence_length: int = MAX_SEQUENCE_LENGTH
    max_query_length: int = MAX_QUERY_LENGTH
    max_sentence_length: int = MAX_SENTENCE_LENGTH
    max_sentences: int = MAX_SENTENCES
    max_answer_tokens: int = MAX_ANSWER_TOKENS
    ngram_max: int = 1
    ranker_negatives: int = 2
    freeze_answerer: bool = False
    cna_aware: bool = True

    def __post_init__(self) -> None:
        for name in ('batch_size', 'n_r', 'k', 'max_sequence_length', 'max_query_length', 'max_sentence_length',
                     'max_sentences', 'max_answer_tokens', 'ngram_max', 'ranker_negatives'):
            if getattr(self, name) <= 0:
                msg = f'{name} must be positive, got {getattr(self, name)}'
                raise ConfigError(msg)
        for name in ('pretrain_epochs', 'e2e_epochs', 'lambda_r', 'lambda_na', 'weight_decay'):
            if getattr(self, name) < 0:
                msg = f'{name} must be non-negative, got {getattr(self, name)}'
                raise ConfigError(msg)
        if self.tau <= 0 or self.learning_rate <= 0:
            msg = 'tau and learning_rate must be positive'
            raise ConfigError(msg)
        for name in ('alpha', 'beta'):
            if not 0.0 <= getattr(self, name) < 1.0:
                msg = f'{name} must lie in [0, 1), got {getattr(self, name)}'
                raise ConfigError(msg)


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of the desk-scale transformer encoder."""

    vocabulary_size: int = 0
    embedding_dim: int = 64
    layer_count: int = 2
    head_count: int = 4
    feed_forward_dim: int = 128
    max_positions: int = MAX_SEQUENCE_LENGTH
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.embedding_dim <= 0 or self.layer_count <= 0 or self.head_count <= 0 or self.feed_forward_dim <= 0:
            msg = 'Encoder sizes must be positive'
            raise ConfigError(msg)
        if self.embedding_dim % self.head_count:
            msg = f'embedding_dim {self.embedding_dim} is not divisible by head_count {self.head_count}'
            raise ConfigError(msg)
        if self.max_positions < MAX_SEQUENCE_LENGTH:
            msg = f'max_positions must be at least {MAX_SEQUENCE_LENGTH}'
            raise ConfigError(msg)
        if not 0.0 <= self.dropout < 1.0:
            msg = f'dropout must lie in [0, 1), got {self.dropout}'
            raise ConfigError(msg)


def config_to_dict(config: TrainingConfig | EncoderConfig) -> dict[str, Any]:
    return asdict(config)


def load_config(path: str | Path | None = None,
                overrides: Mapping[str, Any] | None = None,
                *,
                base_training: TrainingConfig | None = None,
                base_encoder: EncoderConfig | None = None) -> tuple[TrainingConfig, EncoderConfig]:
    """Resolve both configuration records from a flat JSON file and overrides.

    Precedence is override > file > default. Overrides set to None are ignored.

    :param path: Optional path to a flat JSON object whose keys are config field names.
    :param overrides: Values from the command line.
    :param base_training: Record to start from instead of the defaults (e.g. one read from a checkpoint).
    :param base_encoder: Encoder record to start from instead of the defaults.
    :return: The resolved (TrainingConfig, EncoderConfig) pair.
    :raises ConfigError: If the file is not a flat JSON object or names an unknown key."""
    values: dict[str, Any] = {}

    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            msg = f'Cannot read config file {path}: {e}'
            raise ConfigError(msg) from e
        if not isinstance(loaded, dict):
            msg = f'Config file {path} must contain a flat JSON object'
            raise ConfigError(msg)
        values.update(loaded)

    values.update({key: value for key, value in (overrides or {}).items() if value is not None})

    training_fields = {f.name for f in fields(TrainingConfig)}
    encoder_fields = {f.name for f in fields(EncoderConfig)}
    unknown = sorted(set(values) - training_fields - encoder_fields)
    if unknown:
        msg = f'Unknown config keys: {unknown}'
        raise ConfigError(msg)

    training = replace(base_training or TrainingConfig(), **{k: v for k, v in values.items() if k in training_fields})
    encoder = replace(base_encoder or EncoderConfig(), **{k: v for k, v in values.items() if k in encoder_fields})
    return training, encoder
