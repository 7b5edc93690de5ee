"""Pretraining of each module and end-to-end training through the Gumbel sampler."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn
from tqdm import tqdm

from .answer_module import AnswerModel, answer_loss
from .config import EncoderConfig, TrainingConfig
from .constants import AnswerLabel
from .corpus import AnswerTarget, Example, answer_sentences
from .dataset_builder import TfidfIndex, augment_with_cna, hardest_negative_paragraph
from .encoder import Packer, PackedInput
from .exceptions import CheckpointError, EmptyDatasetError, TrainingDivergedError
from .extraction_module import (ExtractionModel, SampledRationale, SentenceScores, force_nonempty, gumbel_sample,
                                no_answer_penalty, rationale_loss)
from .internal import chunked, derive_seed
from .ranker import ParagraphRanker
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)


@dataclass
class TrainStepRecord:
    """What one end-to-end step saw and lost on one example."""

    example_id: str
    sampled_rationale: tuple[int, ...]
    effective_label: AnswerLabel
    answer_loss: float
    rationale_loss: float
    no_answer_loss: float | None

    def to_dict(self) -> dict[str, Any]:
        record = asdict(self)
        record['effective_label'] = str(self.effective_label)
        return record

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'TrainStepRecord':
        return cls(**{**data, 'sampled_rationale': tuple(data['sampled_rationale']),
                      'effective_label': AnswerLabel(data['effective_label'])})


@dataclass
class TrainingResult:
    model: nn.Module
    epoch_losses: list[float] = field(default_factory=list)


@dataclass
class E2EResult:
    extractor: ExtractionModel
    answerer: AnswerModel
    records: list[TrainStepRecord] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)


@dataclass(eq=False)
class E2EStepOutput:
    loss: Tensor
    record: TrainStepRecord
    sample: SampledRationale
    scores: SentenceScores


def training_view(example: Example) -> Example:
    """The example restricted to its gold paragraphs, in passage order."""
    indices = example.gold_paragraph_indices()
    return example.restrict_to_paragraphs(indices) if indices else example


def build_cna_index(examples: Sequence[Example], config: TrainingConfig, index: TfidfIndex | None) -> TfidfIndex:
    return index if index is not None else TfidfIndex.from_examples(examples, config.ngram_max)


def _train_epochs(stage: str, parameters: list[nn.Parameter], item_ids: Sequence[str],
                  loss_fn: Callable[[int, int], Tensor], config: TrainingConfig, epochs: int) -> list[float]:
    """Run mini-batch AdamW over items, accumulating per-item gradients up to batch_size.

    :param stage: Stage name used for logging and error messages.
    :param parameters: Parameters to optimize.
    :param item_ids: Id of every training item, used to report divergence.
    :param loss_fn: Maps (item index, epoch) to the item's scalar loss.
    :return: Mean loss per epoch.
    :raises TrainingDivergedError: If a loss becomes NaN or infinite."""
    optimizer = torch.optim.AdamW(parameters, lr=config.learning_rate, weight_decay=config.weight_decay)
    history: list[float] = []
    for epoch in range(epochs):
        order = np.random.default_rng(derive_seed(config.seed, stage, epoch)).permutation(len(item_ids))
        total = 0.0
        for batch in tqdm(list(chunked(order, config.batch_size)), desc=f'{stage} epoch {epoch + 1}/{epochs}',
                          leave=False, disable=None):
            optimizer.zero_grad()
            for i in batch:
                loss = loss_fn(int(i), epoch)
                _check_finite(stage, loss, [item_ids[int(i)]])
                (loss / len(batch)).backward()
                total += float(loss.detach())
            optimizer.step()
        history.append(total / len(item_ids))
        logger.info('%s epoch %d/%d: mean loss %.4f', stage, epoch + 1, epochs, history[-1])
    return history


def _check_finite(stage: str, loss: Tensor, example_ids: list[str]) -> None:
    if not torch.isfinite(loss).all():
        logger.error('Non-finite loss in %s on %s', stage, example_ids)
        raise TrainingDivergedError(stage, example_ids)


def pretrain_extractor(examples: Sequence[Example], tokenizer: Tokenizer, config: TrainingConfig,
                       encoder_config: EncoderConfig, model: ExtractionModel | None = None) -> TrainingResult:
    """Train the extraction module on L^R over gold-paragraph views.

    :raises EmptyDatasetError: If there are no examples."""
    if not examples:
        raise EmptyDatasetError('pretrain_extractor')
    torch.manual_seed(config.seed)
    model = model if model is not None else ExtractionModel(encoder_config)
    model.train()

    packer = Packer.from_config(tokenizer, config)
    views = [training_view(e) for e in examples]
    packed = [packer.pack_extraction_input(v.query, v.passage.sentences) for v in views]

    def loss_fn(i: int, _: int) -> Tensor:
        return rationale_loss(model(packed[i]), views[i].gold_rationale)

    history = _train_epochs('pretrain_extractor', list(model.parameters()), [v.id for v in views], loss_fn, config,
                            config.pretrain_epochs)
    return TrainingResult(model, history)


def answer_training_items(examples: Sequence[Example], packer: Packer, config: TrainingConfig,
                          index: TfidfIndex | None = None) -> list[tuple[str, PackedInput, AnswerTarget]]:
    """Gold-rationale answer inputs plus one negative-sampled CNA input per example."""
    views = [training_view(e) for e in examples]
    cna_examples = augment_with_cna(examples, build_cna_index(examples, config, index), config.seed)
    items = []
    for example in [*views, *cna_examples]:
        rationale = [example.passage.sentence(i) for i in sorted(example.gold_rationale)]
        items.append((example.id, packer.pack_answer_input(example.query, rationale), example.gold_answer))
    return items


def pretrain_answerer(examples: Sequence[Example], tokenizer: Tokenizer, config: TrainingConfig,
                      encoder_config: EncoderConfig, model: AnswerModel | None = None,
                      index: TfidfIndex | None = None) -> TrainingResult:
    """Train the answer module on L^A with the gold rationale as input, CNA augmentation included.

    :raises EmptyDatasetError: If there are no examples."""
    if not examples:
        raise EmptyDatasetError('pretrain_answerer')
    torch.manual_seed(config.seed)
    model = model if model is not None else AnswerModel(encoder_config)
    model.train()

    items = answer_training_items(examples, Packer.from_config(tokenizer, config), config, index)

    def loss_fn(i: int, _: int) -> Tensor:
        _, packed, target = items[i]
        return answer_loss(model(packed), target, packed)

    history = _train_epochs('pretrain_answerer', list(model.parameters()), [item[0] for item in items], loss_fn,
                            config, config.pretrain_epochs)
    return TrainingResult(model, history)


def ranker_training_items(examples: Sequence[Example], packer: Packer, config: TrainingConfig,
                          index: TfidfIndex) -> list[tuple[str, PackedInput, float]]:
    """Gold paragraphs as positives; the TF-IDF hardest paragraph plus random others as negatives."""
    items = []
    for example in examples:
        gold = example.gold_paragraph_indices()
        if not gold:
            continue
        paragraphs = example.passage.paragraphs
        negatives: list[int] = []
        hardest = hardest_negative_paragraph(example, index)
        if hardest is not None:
            negatives.append(hardest)
        others = [i for i in range(len(paragraphs)) if i not in gold and i not in negatives and paragraphs[i].sentences]
        rng = np.random.default_rng(derive_seed(config.seed, 'ranker_negatives', example.id))
        extra = min(len(others), config.ranker_negatives - len(negatives))
        negatives += [others[int(i)] for i in rng.choice(len(others), size=extra, replace=False)] if extra > 0 else []

        for i, label in [*((g, 1.0) for g in gold), *((n, 0.0) for n in negatives)]:
            if paragraphs[i].sentences:
                items.append((example.id, packer.pack_extraction_input(example.query, paragraphs[i].sentences),
                              label))
    return items


def pretrain_ranker(examples: Sequence[Example], tokenizer: Tokenizer, config: TrainingConfig,
                    encoder_config: EncoderConfig, model: ParagraphRanker | None = None,
                    index: TfidfIndex | None = None) -> TrainingResult:
    """Train the paragraph ranker with binary cross entropy over (query, paragraph) pairs.

    :raises EmptyDatasetError: If no example has a gold paragraph."""
    items = ranker_training_items(examples, Packer.from_config(tokenizer, config), config,
                                  build_cna_index(examples, config, index))
    if not items:
        raise EmptyDatasetError('pretrain_ranker')
    torch.manual_seed(config.seed)
    model = model if model is not None else ParagraphRanker(encoder_config)
    model.train()

    def loss_fn(i: int, _: int) -> Tensor:
        _, packed, label = items[i]
        return F.binary_cross_entropy_with_logits(model([packed]), torch.tensor([label]))

    history = _train_epochs('pretrain_ranker', list(model.parameters()), [item[0] for item in items], loss_fn,
                            config, config.pretrain_epochs)
    return TrainingResult(model, history)


def gated_answer_input(example: Example, sample: SampledRationale, packer: Packer) -> tuple[PackedInput, Tensor]:
    """Pack the sampled rationale and route the straight-through gate onto its tokens.

    Every token of sentence i is weighted by gate_i; query and special tokens by 1."""
    sampled = sample.rationale
    packed = packer.pack_answer_input(example.query, [example.passage.sentence(i) for i in sorted(sampled)])
    row_of = {sid: k for k, sid in enumerate(sample.sentence_ids)}
    one = len(sample.sentence_ids)
    gates = torch.cat([sample.gate, sample.gate.new_ones(1)])
    index = torch.tensor([row_of.get(segment, one) for segment in packed.segment_map], dtype=torch.long)
    return packed, gates[index]


def e2e_step(example: Example, extractor: ExtractionModel, answerer: AnswerModel, packer: Packer,
             config: TrainingConfig, generator: torch.Generator | None = None) -> E2EStepOutput:
    """Compute L = L^A + lambda_r L^R + lambda_na L^NA on one example.

    An empty sample is replaced by argmax_i p_i. When the gold rationale is not inside the
    sample, the answer target becomes CNA.

    :param example: A training view (gold paragraphs only).
    :param extractor: The extraction module.
    :param answerer: The answer module.
    :param packer: Packs both inputs.
    :param config: Loss weights, tau and packing limits.
    :param generator: Random source of the Gumbel noise.
    :return: The differentiable loss and the step record."""
    scores = extractor(packer.pack_extraction_input(example.query, example.passage.sentences))
    sample = force_nonempty(gumbel_sample(scores, config.tau, generator), scores)
    sampled = sample.rationale

    target = example.gold_answer if example.gold_rationale <= sampled else example.gold_answer.as_cna()
    packed, weights = gated_answer_input(example, sample, packer)
    loss_a = answer_loss(answerer(packed, token_weights=weights), target, packed)
    loss_r = rationale_loss(scores, example.gold_rationale)
    loss = loss_a + config.lambda_r * loss_r

    loss_na = None
    if config.lambda_na > 0:
        loss_na = no_answer_penalty(scores, sampled, answer_sentences(example))
        loss = loss + config.lambda_na * loss_na

    record = TrainStepRecord(example.id, tuple(sorted(sampled)), target.label, float(loss_a.detach()),
                             float(loss_r.detach()), None if loss_na is None else float(loss_na.detach()))
    return E2EStepOutput(loss, record, sample, scores)


def train_e2e(examples: Sequence[Example], extractor: ExtractionModel, answerer: AnswerModel, tokenizer: Tokenizer,
              config: TrainingConfig, *, index: TfidfIndex | None = None, state_path: str | Path | None = None,
              resume: bool = False) -> E2EResult:
    """Fine-tune both modules jointly through the Gumbel straight-through estimator.

    After every epoch the trainer state is written to state_path (when given). With resume set,
    training continues from that state and finishes with the same parameters an uninterrupted
    run would have.

    :param examples: Training examples; negative-sampled CNA examples are added.
    :param extractor: Pretrained extraction module, updated in place.
    :param answerer: Pretrained answer module, updated in place unless config.freeze_answerer.
    :param tokenizer: Tokenizer shared by both modules.
    :param config: Training configuration.
    :param index: TF-IDF index for augmentation; built from the examples when omitted.
    :param state_path: Where the per-epoch trainer state is kept.
    :param resume: Continue from state_path if it exists.
    :return: The trained modules, every step record and the mean loss per epoch.
    :raises EmptyDatasetError: If there are no examples.
    :raises TrainingDivergedError: If a loss becomes NaN or infinite."""
    if not examples:
        raise EmptyDatasetError('train_e2e')

    packer = Packer.from_config(tokenizer, config)
    views = [training_view(e) for e in examples]
    views += augment_with_cna(examples, build_cna_index(examples, config, index), config.seed)

    answerer.requires_grad_(not config.freeze_answerer)
    parameters = list(extractor.parameters())
    if not config.freeze_answerer:
        parameters += list(answerer.parameters())
    optimizer = torch.optim.AdamW(parameters, lr=config.learning_rate, weight_decay=config.weight_decay)

    result = E2EResult(extractor, answerer)
    start_epoch = 0
    if resume and state_path is not None and Path(state_path).is_file():
        start_epoch = _load_trainer_state(state_path, result, optimizer)
        logger.info('Resuming end-to-end training at epoch %d', start_epoch + 1)

    extractor.train()
    answerer.train(not config.freeze_answerer)
    for epoch in range(start_epoch, config.e2e_epochs):
        order = np.random.default_rng(derive_seed(config.seed, 'train_e2e', epoch)).permutation(len(views))
        total = 0.0
        for batch in tqdm(list(chunked(order, config.batch_size)),
                          desc=f'train_e2e epoch {epoch + 1}/{config.e2e_epochs}', leave=False, disable=None):
            optimizer.zero_grad()
            for i in batch:
                example = views[int(i)]
                generator = torch.Generator().manual_seed(derive_seed(config.seed, 'gumbel', epoch, example.id))
                output = e2e_step(example, extractor, answerer, packer, config, generator)
                _check_finite('train_e2e', output.loss, [example.id])
                (output.loss / len(batch)).backward()
                total += float(output.loss.detach())
                result.records.append(output.record)
            optimizer.step()

        result.epoch_losses.append(total / len(views))
        logger.info('train_e2e epoch %d/%d: mean loss %.4f', epoch + 1, config.e2e_epochs, result.epoch_losses[-1])
        if state_path is not None:
            _save_trainer_state(state_path, epoch + 1, result, optimizer)

    return result


def _save_trainer_state(path: str | Path, epoch: int, result: E2EResult, optimizer: torch.optim.Optimizer) -> None:
    torch.save({
        'epoch': epoch,
        'extractor': result.extractor.state_dict(),
        'answerer': result.answerer.state_dict(),
        'optimizer': optimizer.state_dict(),
        'records': [r.to_dict() for r in result.records],
        'epoch_losses': list(result.epoch_losses),
    }, Path(path))


def _load_trainer_state(path: str | Path, result: E2EResult, optimizer: torch.optim.Optimizer) -> int:
    try:
        state = torch.load(Path(path), map_location='cpu', weights_only=True)
        result.extractor.load_state_dict(state['extractor'])
        result.answerer.load_state_dict(state['answerer'])
        optimizer.load_state_dict(state['optimizer'])
    except (OSError, RuntimeError, KeyError, ValueError) as e:
        msg = f'Cannot resume from trainer state {path}: {e}'
        raise CheckpointError(msg) from e
    result.records[:] = [TrainStepRecord.from_dict(r) for r in state['records']]
    result.epoch_losses[:] = list(state['epoch_losses'])
    return int(state['epoch'])


def sample_answer_losses(example: Example, extractor: ExtractionModel, answerer: AnswerModel, tokenizer: Tokenizer,
                         config: TrainingConfig, samples: int = 1000, seed: int = 0) -> np.ndarray:
    """-log P(A* | R, Q) of the gold answer for repeated rationale draws R ~ P(R | Q, P).

    Their mean upper-bounds -log P(A* | Q, P) estimated from the same draws."""
    packer = Packer.from_config(tokenizer, config)
    generator = torch.Generator().manual_seed(seed)
    losses = np.empty(samples)
    with torch.no_grad():
        scores = extractor(packer.pack_extraction_input(example.query, example.passage.sentences))
        for n in range(samples):
            sample = force_nonempty(gumbel_sample(scores, config.tau, generator), scores)
            packed, weights = gated_answer_input(example, sample, packer)
            losses[n] = float(answer_loss(answerer(packed, token_weights=weights), example.gold_answer, packed))
    return losses
