"""Answer-label classification, span decoding and the answer loss."""

import logging
from dataclasses import dataclass, replace

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .config import EncoderConfig
from .constants import ANSWER_LABELS, CNA_ANSWER, MAX_ANSWER_TOKENS, NUM_ANSWER_LABELS, AnswerLabel
from .corpus import AnswerTarget
from .encoder import PackedInput, SequenceEncoder, encode
from .exceptions import InferenceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AnswerScores:
    """Raw scores of the answer module for one packed input.

    label_scores is indexed by ANSWER_LABELS; span_start and span_end cover every token."""

    label_scores: Tensor
    span_start: Tensor
    span_end: Tensor


@dataclass(frozen=True)
class AnswerPrediction:
    """A decoded answer.

    span_candidate is the best span found regardless of the chosen label, so the
    prediction can fall back to Span when the CNA label is overruled."""

    label: AnswerLabel
    span_text: str | None
    cna_probability: float
    label_scores: tuple[float, ...] = ()
    span_candidate: str | None = None

    def __post_init__(self) -> None:
        if (self.label == AnswerLabel.SPAN) != (self.span_text is not None):
            msg = f'A {self.label} prediction has span_text={self.span_text!r}'
            raise InferenceError(msg)

    def answer_string(self) -> str:
        match self.label:
            case AnswerLabel.SPAN:
                return self.span_text or ''
            case AnswerLabel.CNA:
                return CNA_ANSWER
            case _:
                return str(self.label)

    def as_cna(self) -> 'AnswerPrediction':
        return replace(self, label=AnswerLabel.CNA, span_text=None)

    def without_cna(self) -> 'AnswerPrediction':
        """The best-scoring label other than CNA."""
        if self.label != AnswerLabel.CNA:
            return self
        for label in _labels_by_score(self.label_scores):
            if label == AnswerLabel.CNA or (label == AnswerLabel.SPAN and self.span_candidate is None):
                continue
            span_text = self.span_candidate if label == AnswerLabel.SPAN else None
            return replace(self, label=label, span_text=span_text)
        return replace(self, label=AnswerLabel.NO, span_text=None)


class AnswerModel(nn.Module):
    """Encoder plus the answer-label head W^c and the span head."""

    def __init__(self, encoder_config: EncoderConfig) -> None:
        super().__init__()
        self.encoder = SequenceEncoder(encoder_config)
        self.label_head = nn.Linear(encoder_config.embedding_dim, NUM_ANSWER_LABELS)
        self.span_head = nn.Linear(encoder_config.embedding_dim, 2)

    def forward(self, packed: PackedInput, token_weights: Tensor | None = None) -> AnswerScores:
        embeddings = encode(packed, self.encoder, token_weights)
        return compute_answer_scores(embeddings, self.label_head, self.span_head)


def compute_answer_scores(embeddings: Tensor, label_head: nn.Linear, span_head: nn.Linear) -> AnswerScores:
    """Label scores from the [CLS] row, start/end scores from every row.

    :param embeddings: (L, d) encoder output of an answer packing.
    :return: The answer scores."""
    spans = span_head(embeddings)
    return AnswerScores(label_head(embeddings[0]), spans[:, 0], spans[:, 1])


def best_span(scores: AnswerScores, packed: PackedInput,
              max_answer_tokens: int = MAX_ANSWER_TOKENS) -> tuple[int, int] | None:
    """The (start, end) token pair maximizing start_i + end_j over rationale tokens.

    Requires i <= j and j - i < max_answer_tokens. Ties go to the smallest i, then the smallest j.

    :return: Token positions in the packed input, or None if the rationale is empty."""
    positions = packed.context_positions()
    if not positions:
        return None

    index = torch.tensor(positions, dtype=torch.long)
    start = scores.span_start.detach()[index]
    end = scores.span_end.detach()[index]
    joint = start.unsqueeze(1) + end.unsqueeze(0)

    rows = torch.arange(len(positions)).unsqueeze(1)
    cols = torch.arange(len(positions)).unsqueeze(0)
    allowed = (cols >= rows) & (cols - rows < max_answer_tokens)
    joint = joint.masked_fill(~allowed, float('-inf'))

    flat = int(torch.argmax(joint))
    i, j = divmod(flat, len(positions))
    return positions[i], positions[j]


def span_text_of(packed: PackedInput, span: tuple[int, int]) -> str:
    start_offset = packed.token_offsets[span[0]]
    end_offset = packed.token_offsets[span[1]]
    if start_offset is None or end_offset is None:
        msg = f'Span {span} does not lie inside the rationale'
        raise InferenceError(msg)
    return packed.context_text[start_offset[0]:end_offset[1]]


def decode_answer(scores: AnswerScores, packed: PackedInput,
                  max_answer_tokens: int = MAX_ANSWER_TOKENS) -> AnswerPrediction:
    """Pick the answer label and, for Span, the answer text.

    The label is the argmax of the label scores. When it is Span but the rationale holds
    no token, the best non-Span label is used instead.

    :param scores: Answer scores of the packed input.
    :param packed: The answer packing the scores were computed on.
    :param max_answer_tokens: Longest span considered.
    :return: The decoded prediction."""
    label_scores = tuple(scores.label_scores.detach().tolist())
    cna_probability = float(torch.softmax(scores.label_scores.detach(), dim=-1)[AnswerLabel.CNA.index])

    span = best_span(scores, packed, max_answer_tokens)
    span_candidate = span_text_of(packed, span) if span is not None else None

    for label in _labels_by_score(label_scores):
        if label == AnswerLabel.SPAN and span_candidate is None:
            continue
        span_text = span_candidate if label == AnswerLabel.SPAN else None
        return AnswerPrediction(label, span_text, cna_probability, label_scores, span_candidate)

    msg = 'No answer label could be decoded'
    raise InferenceError(msg)


def span_token_positions(target: AnswerTarget, packed: PackedInput) -> tuple[int, int] | None:
    """Token positions covering the target span inside an answer packing.

    :return: (start, end) token positions, or None when the span's sentence is not in the
        packing or its tokens were truncated away."""
    if target.span_sentence_id is None or target.span_char_range is None:
        return None
    base = packed.sentence_char_start(target.span_sentence_id)
    if base is None:
        return None

    char_start, char_end = base + target.span_char_range[0], base + target.span_char_range[1]
    covering = [i for i in packed.context_positions()
                if packed.token_offsets[i][0] < char_end and packed.token_offsets[i][1] > char_start]
    if not covering:
        return None

    first, last = covering[0], covering[-1]
    if packed.token_offsets[first][0] > char_start or packed.token_offsets[last][1] < char_end:
        return None
    return first, last


def answer_loss(scores: AnswerScores, target: AnswerTarget, packed: PackedInput) -> Tensor:
    """Cross entropy of the label plus, for Span targets, of the start and end positions.

    The span terms are skipped when the target span is not present in the packing.

    :param scores: Answer scores of the packed input.
    :param target: The effective answer target.
    :param packed: The answer packing the scores were computed on.
    :return: A scalar loss."""
    loss = F.cross_entropy(scores.label_scores.unsqueeze(0), torch.tensor([target.label.index]))
    if target.label != AnswerLabel.SPAN:
        return loss

    span = span_token_positions(target, packed)
    if span is None:
        logger.debug('Span target %r is not in the answer input; label loss only', target.span_text)
        return loss
    loss = loss + F.cross_entropy(scores.span_start.unsqueeze(0), torch.tensor([span[0]]))
    return loss + F.cross_entropy(scores.span_end.unsqueeze(0), torch.tensor([span[1]]))


def _labels_by_score(label_scores: tuple[float, ...]) -> list[AnswerLabel]:
    order = sorted(range(len(label_scores)), key=lambda i: -label_scores[i])
    return [ANSWER_LABELS[i] for i in order]
