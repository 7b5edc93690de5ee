"""Model checkpoints and the on-disk checkpoint store."""

import pickle
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from functools import wraps
from pathlib import Path
from typing import Any, Concatenate

import torch
from torch import nn

from .answer_module import AnswerModel
from .config import EncoderConfig, TrainingConfig
from .constants import ANSWERER_FILE, EXTRACTOR_FILE, RANKER_FILE, TRAINER_STATE_FILE, VOCAB_FILE
from .exceptions import CheckpointError, CheckpointNotFoundError
from .extraction_module import ExtractionModel
from .ranker import ParagraphRanker
from .tokenizer import Tokenizer

MODEL_CLASSES: dict[str, type[nn.Module]] = {
    'extractor': ExtractionModel,
    'answerer': AnswerModel,
    'ranker': ParagraphRanker,
}

MODEL_FILES = {
    'extractor': EXTRACTOR_FILE,
    'answerer': ANSWERER_FILE,
    'ranker': RANKER_FILE,
}


@dataclass
class Checkpoint:
    """Everything needed to rebuild one trained model."""

    kind: str
    state_dict: dict[str, torch.Tensor]
    encoder_config: EncoderConfig
    training_config: TrainingConfig
    vocabulary: list[str]
    extra: dict[str, Any] = field(default_factory=dict)

    def build_model(self) -> nn.Module:
        model = MODEL_CLASSES[self.kind](self.encoder_config)
        try:
            model.load_state_dict(self.state_dict)
        except RuntimeError as e:
            msg = f'{self.kind} checkpoint does not match its encoder config: {e}'
            raise CheckpointError(msg) from e
        return model


def save_checkpoint(path: str | Path, kind: str, model: nn.Module, encoder_config: EncoderConfig,
                    training_config: TrainingConfig, tokenizer: Tokenizer,
                    extra: dict[str, Any] | None = None) -> None:
    if kind not in MODEL_CLASSES:
        msg = f'Unknown model kind {kind!r}'
        raise CheckpointError(msg)
    torch.save({
        'kind': kind,
        'state_dict': model.state_dict(),
        'encoder_config': asdict(encoder_config),
        'training_config': asdict(training_config),
        'vocabulary': tokenizer.vocabulary,
        'extra': extra or {},
    }, Path(path))


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Load a checkpoint written by `save_checkpoint`.

    :param path: The checkpoint file.
    :return: The checkpoint.
    :raises CheckpointNotFoundError: If the file does not exist.
    :raises CheckpointError: If the file is not a readable checkpoint."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointNotFoundError(str(path))
    try:
        data = torch.load(path, map_location='cpu', weights_only=True)
        return Checkpoint(kind=data['kind'],
                          state_dict=data['state_dict'],
                          encoder_config=EncoderConfig(**data['encoder_config']),
                          training_config=TrainingConfig(**data['training_config']),
                          vocabulary=list(data['vocabulary']),
                          extra=dict(data.get('extra', {})))
    except (OSError, EOFError, RuntimeError, KeyError, TypeError, ValueError, pickle.UnpicklingError) as e:
        msg = f'Cannot read checkpoint {path}: {e}'
        raise CheckpointError(msg) from e


class CheckpointStore:
    """A directory holding the tokenizer and the trained models of one run.

    The store is not created on disk until `init()` is called."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def init(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)

    def exists(self) -> bool:
        return self.root.is_dir()

    @staticmethod
    def requires_store[**P, R](func: Callable[Concatenate['CheckpointStore', P], R]) -> \
            Callable[Concatenate['CheckpointStore', P], R]:
        """Decorate a CheckpointStore method to ensure that the store directory exists.

        :param func: The method to decorate.
        :return: A wrapper function that checks for the store's existence."""

        @wraps(func)
        def _verify_store(self: 'CheckpointStore', *args: P.args, **kwargs: P.kwargs) -> R:
            if not self.exists():
                raise CheckpointNotFoundError(str(self.root))

            return func(self, *args, **kwargs)

        return _verify_store

    def model_path(self, kind: str) -> Path:
        return self.root / MODEL_FILES[kind]

    def vocab_path(self) -> Path:
        return self.root / VOCAB_FILE

    def trainer_state_path(self) -> Path:
        return self.root / TRAINER_STATE_FILE

    @requires_store
    def has(self, kind: str) -> bool:
        return self.model_path(kind).is_file()

    @requires_store
    def save_tokenizer(self, tokenizer: Tokenizer) -> None:
        tokenizer.save(self.vocab_path())

    @requires_store
    def load_tokenizer(self) -> Tokenizer:
        if not self.vocab_path().is_file():
            raise CheckpointNotFoundError(str(self.vocab_path()))
        return Tokenizer.load(self.vocab_path())

    @requires_store
    def save_model(self, kind: str, model: nn.Module, encoder_config: EncoderConfig,
                   training_config: TrainingConfig, tokenizer: Tokenizer, extra: dict[str, Any] | None = None) -> Path:
        path = self.model_path(kind)
        save_checkpoint(path, kind, model, encoder_config, training_config, tokenizer, extra)
        return path

    @requires_store
    def load_model(self, kind: str) -> tuple[nn.Module, Checkpoint]:
        """Load and rebuild one model.

        :raises CheckpointNotFoundError: If the model was never saved to this store.
        :raises CheckpointError: If its kind or vocabulary disagrees with the store."""
        checkpoint = load_checkpoint(self.model_path(kind))
        if checkpoint.kind != kind:
            msg = f'{self.model_path(kind)} holds a {checkpoint.kind} checkpoint, not {kind}'
            raise CheckpointError(msg)
        if self.vocab_path().is_file() and checkpoint.vocabulary != self.load_tokenizer().vocabulary:
            msg = f'{kind} checkpoint was trained with a different vocabulary than {self.vocab_path()}'
            raise CheckpointError(msg)
        return checkpoint.build_model(), checkpoint
