"""Sentence scoring, rationale extraction and the straight-through Gumbel sampler."""

from collections.abc import Sequence
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .config import EncoderConfig
from .constants import LOGIT_CAP, PROB_EPSILON
from .corpus import Rationale
from .encoder import PackedInput, SequenceEncoder, encode


@dataclass(frozen=True, eq=False)
class SentenceScores:
    """Per-sentence logits W^s s_i + b^s and probabilities p_i = sigmoid(logit_i)."""

    sentence_ids: tuple[int, ...]
    logits: Tensor
    probs: Tensor

    @classmethod
    def from_logits(cls, sentence_ids: Sequence[int], logits: Tensor) -> 'SentenceScores':
        return cls(tuple(sentence_ids), logits, torch.sigmoid(logits))

    def __len__(self) -> int:
        return len(self.sentence_ids)

    def prob_list(self) -> list[float]:
        return self.probs.detach().tolist()


@dataclass(frozen=True, eq=False)
class SampledRationale:
    """One Gumbel draw over the sentences.

    hard_mask is the sampled indicator; relaxed is the temperature-tau relaxation z_i.
    gate has the value of hard_mask on the forward pass and the gradient of relaxed on the backward pass."""

    sentence_ids: tuple[int, ...]
    hard_mask: Tensor
    relaxed: Tensor
    gumbel_pairs: tuple[Tensor, Tensor]

    @property
    def gate(self) -> Tensor:
        return self.hard_mask + self.relaxed - self.relaxed.detach()

    @property
    def rationale(self) -> Rationale:
        return frozenset(sid for sid, bit in zip(self.sentence_ids, self.hard_mask.tolist(), strict=True) if bit > 0)


class ExtractionModel(nn.Module):
    """Encoder plus the linear sentence-scoring head."""

    def __init__(self, encoder_config: EncoderConfig) -> None:
        super().__init__()
        self.encoder = SequenceEncoder(encoder_config)
        self.head = nn.Linear(encoder_config.embedding_dim, 1)

    def forward(self, packed: PackedInput) -> SentenceScores:
        embeddings = encode(packed, self.encoder)
        return score_sentences(embeddings, packed.marker_positions, self.head, packed.sentence_ids)


def score_sentences(embeddings: Tensor, marker_positions: Sequence[int], head: nn.Linear,
                    sentence_ids: Sequence[int] | None = None) -> SentenceScores:
    """Score each sentence from its [CLS_S] row.

    :param embeddings: (L, d) encoder output.
    :param marker_positions: Row index of each sentence marker.
    :param head: Linear layer d -> 1.
    :param sentence_ids: Id of each scored sentence; defaults to 0..N-1.
    :return: Logits capped to +-LOGIT_CAP and their sigmoid probabilities."""
    rows = embeddings[list(marker_positions)]
    logits = head(rows).squeeze(-1).clamp(-LOGIT_CAP, LOGIT_CAP)
    ids = tuple(sentence_ids) if sentence_ids is not None else tuple(range(len(marker_positions)))
    return SentenceScores.from_logits(ids, logits)


def threshold_extract(scores: SentenceScores, alpha: float) -> Rationale:
    """Sentences with p_i > alpha."""
    return frozenset(sid for sid, p in zip(scores.sentence_ids, scores.prob_list(), strict=True) if p > alpha)


def gumbel_from_uniform(u: Tensor) -> Tensor:
    return -torch.log(-torch.log(u))


def sample_uniform(shape: tuple[int, ...], generator: torch.Generator | None = None,
                   dtype: torch.dtype = torch.float32) -> Tensor:
    """Uniform(0, 1) draws with the boundary values 0 and 1 resampled."""
    u = torch.rand(shape, generator=generator, dtype=dtype)
    bad = (u <= 0) | (u >= 1)
    while bool(bad.any()):
        u[bad] = torch.rand(int(bad.sum()), generator=generator, dtype=dtype)
        bad = (u <= 0) | (u >= 1)
    return u


def gumbel_sample(scores: SentenceScores, tau: float, generator: torch.Generator | None = None,
                  *, gumbel_pairs: tuple[Tensor, Tensor] | None = None) -> SampledRationale:
    """Sample a rationale with the straight-through Gumbel-softmax estimator.

    Sentence i is extracted iff g_i + log p_i > g'_i + log(1 - p_i); a tie is not extracted.
    The relaxation is z_i = sigmoid(((g_i + log p_i) - (g'_i + log(1 - p_i))) / tau), the
    two-way softmax at temperature tau.

    :param scores: Sentence scores carrying the logits to differentiate through.
    :param tau: Temperature, must be positive.
    :param generator: Random source for the Gumbel noise.
    :param gumbel_pairs: Fixed (g, g') noise, used instead of sampling.
    :return: The sampled rationale.
    :raises ValueError: If tau is not positive."""
    if tau <= 0:
        msg = f'Gumbel temperature must be positive, got {tau}'
        raise ValueError(msg)

    logits = scores.logits
    if gumbel_pairs is None:
        shape = (len(scores),)
        gumbel_pairs = (gumbel_from_uniform(sample_uniform(shape, generator, logits.dtype)),
                        gumbel_from_uniform(sample_uniform(shape, generator, logits.dtype)))
    g, g_prime = gumbel_pairs

    extract_side = g + F.logsigmoid(logits)
    skip_side = g_prime + F.logsigmoid(-logits)
    hard_mask = (extract_side > skip_side).to(logits.dtype).detach()
    relaxed = torch.sigmoid((extract_side - skip_side) / tau)
    return SampledRationale(scores.sentence_ids, hard_mask, relaxed, (g, g_prime))


def force_nonempty(sample: SampledRationale, scores: SentenceScores) -> SampledRationale:
    """Include argmax_i p_i when the draw extracted nothing."""
    if bool(sample.hard_mask.any()):
        return sample
    hard_mask = sample.hard_mask.clone()
    hard_mask[int(torch.argmax(scores.probs.detach()))] = 1.0
    return SampledRationale(sample.sentence_ids, hard_mask, sample.relaxed, sample.gumbel_pairs)


def rationale_loss(scores: SentenceScores, gold: Rationale) -> Tensor:
    """Mean binary cross entropy between p_i and membership in the gold rationale.

    Probabilities are clamped to [PROB_EPSILON, 1 - PROB_EPSILON]."""
    targets = torch.tensor([1.0 if sid in gold else 0.0 for sid in scores.sentence_ids],
                           dtype=scores.probs.dtype)
    probs = scores.probs.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
    return -(targets * torch.log(probs) + (1.0 - targets) * torch.log(1.0 - probs)).mean()


def no_answer_penalty(scores: SentenceScores, extracted: Rationale, answer_sentences: Rationale) -> Tensor:
    """Hinge max(0, max_{r in extracted} logit_r - max_{i in S_A} logit_i).

    The bias b^s cancels in the difference, so logits stand in for W^s s. Zero when either set
    has no scored sentence, which covers Yes/No/CNA targets."""
    extracted_rows = [k for k, sid in enumerate(scores.sentence_ids) if sid in extracted]
    answer_rows = [k for k, sid in enumerate(scores.sentence_ids) if sid in answer_sentences]
    if not extracted_rows or not answer_rows:
        return scores.logits.new_zeros(())
    return torch.relu(scores.logits[extracted_rows].max() - scores.logits[answer_rows].max())
