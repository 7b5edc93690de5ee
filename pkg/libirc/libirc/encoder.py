"""Input packing and the desk-scale sequence encoder."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .config import EncoderConfig, TrainingConfig
from .constants import (CLS_ID, CLS_Q_ID, CLS_S_ID, MAX_QUERY_LENGTH, MAX_SENTENCE_LENGTH, MAX_SENTENCES,
                        MAX_SEQUENCE_LENGTH, PAD_ID, SEGMENT_MARKER, SEGMENT_QUERY, SEP_ID, SEP_Q_ID, SEP_S_ID)
from .corpus import Sentence
from .exceptions import EncoderError, PackingError
from .tokenizer import Piece, Tokenizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PackedInput:
    """A token sequence plus the bookkeeping needed to read results back out of it.

    segment_map holds a sentence id for sentence tokens, SEGMENT_QUERY for query tokens
    and SEGMENT_MARKER for special tokens. token_offsets holds, for answer packing,
    the character range of each context token inside context_text."""

    token_ids: tuple[int, ...]
    marker_positions: tuple[int, ...]
    segment_map: tuple[int, ...]
    sentence_ids: tuple[int, ...] = ()
    context_text: str = ''
    token_offsets: tuple[tuple[int, int] | None, ...] = ()
    sentence_char_starts: tuple[tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.token_ids)

    def context_positions(self) -> list[int]:
        """Token indices that come from a rationale sentence and carry a character offset."""
        return [i for i, offset in enumerate(self.token_offsets) if offset is not None]

    def sentence_char_start(self, sentence_id: int) -> int | None:
        return dict(self.sentence_char_starts).get(sentence_id)

    def tokens_of(self, sentence_id: int) -> list[int]:
        return [i for i, segment in enumerate(self.segment_map) if segment == sentence_id]


class Packer:
    """Packs (query, sentences) into the two input layouts used by the pipeline."""

    def __init__(self, tokenizer: Tokenizer,
                 max_sequence_length: int = MAX_SEQUENCE_LENGTH,
                 max_query_length: int = MAX_QUERY_LENGTH,
                 max_sentence_length: int = MAX_SENTENCE_LENGTH,
                 max_sentences: int = MAX_SENTENCES) -> None:
        self.tokenizer = tokenizer
        self.max_sequence_length = max_sequence_length
        self.max_query_length = max_query_length
        self.max_sentence_length = max_sentence_length
        self.max_sentences = max_sentences

    @classmethod
    def from_config(cls, tokenizer: Tokenizer, config: TrainingConfig) -> 'Packer':
        return cls(tokenizer, config.max_sequence_length, config.max_query_length, config.max_sentence_length,
                   config.max_sentences)

    def _query_pieces(self, query: str) -> list[Piece]:
        pieces = self.tokenizer.tokenize(query)
        if len(pieces) > self.max_query_length:
            logger.debug('Query truncated from %d to %d tokens', len(pieces), self.max_query_length)
            pieces = pieces[:self.max_query_length]
        return pieces

    def pack_extraction_input(self, query: str, sentences: Sequence[Sentence]) -> PackedInput:
        """Pack [CLS_Q] query [SEP_Q] ([CLS_S] sentence [SEP_S])* for sentence scoring.

        At most max_sentences sentences are packed, each cut to max_sentence_length tokens.
        When the sequence would overflow, whole trailing sentences are dropped; a first sentence
        that alone overflows is truncated.

        :param query: The query text.
        :param sentences: Sentences in passage order.
        :return: The packed input with one marker per packed sentence.
        :raises PackingError: If there are no sentences or none fits."""
        if not sentences:
            msg = 'Cannot pack an extraction input without sentences'
            raise PackingError(msg)
        if len(sentences) > self.max_sentences:
            logger.debug('Dropping %d sentences beyond the first %d', len(sentences) - self.max_sentences,
                         self.max_sentences)
            sentences = sentences[:self.max_sentences]

        query_ids = [p.id for p in self._query_pieces(query)]
        token_ids = [CLS_Q_ID, *query_ids, SEP_Q_ID]
        segment_map = [SEGMENT_MARKER, *[SEGMENT_QUERY] * len(query_ids), SEGMENT_MARKER]
        marker_positions: list[int] = []
        sentence_ids: list[int] = []

        for sentence in sentences:
            ids = self.tokenizer.encode(sentence.text)
            if len(ids) > self.max_sentence_length:
                logger.debug('Sentence %d truncated from %d to %d tokens', sentence.id, len(ids),
                             self.max_sentence_length)
                ids = ids[:self.max_sentence_length]

            room = self.max_sequence_length - len(token_ids) - 2
            if len(ids) > room:
                # Whole trailing sentences go first; only a lone first sentence is cut.
                if marker_positions or room <= 0:
                    break
                logger.debug('Sentence %d truncated to %d tokens to fit the sequence', sentence.id, room)
                ids = ids[:room]

            marker_positions.append(len(token_ids))
            sentence_ids.append(sentence.id)
            token_ids += [CLS_S_ID, *ids, SEP_S_ID]
            segment_map += [SEGMENT_MARKER, *[sentence.id] * len(ids), SEGMENT_MARKER]

        if not marker_positions:
            msg = 'No sentence fits into the extraction input'
            raise PackingError(msg)
        if len(sentence_ids) < len(sentences):
            logger.debug('Packed %d of %d sentences', len(sentence_ids), len(sentences))

        return PackedInput(tuple(token_ids), tuple(marker_positions), tuple(segment_map), tuple(sentence_ids))

    def pack_answer_input(self, query: str, rationale_sentences: Sequence[Sentence]) -> PackedInput:
        """Pack [CLS] query [SEP] rationale [SEP] for the answer module.

        Rationale sentences are joined with single spaces in sentence-id order. The rationale
        tail is truncated to fit max_sequence_length.

        :param query: The query text.
        :param rationale_sentences: Rationale sentences in any order; may be empty.
        :return: The packed input with a character offset for every context token."""
        ordered = sorted(rationale_sentences, key=lambda s: s.id)

        char_starts: list[tuple[int, int]] = []
        cursor = 0
        for sentence in ordered:
            char_starts.append((sentence.id, cursor))
            cursor += len(sentence.text) + 1
        context_text = ' '.join(s.text for s in ordered)

        query_ids = [p.id for p in self._query_pieces(query)]
        token_ids = [CLS_ID, *query_ids, SEP_ID]
        segment_map = [SEGMENT_MARKER, *[SEGMENT_QUERY] * len(query_ids), SEGMENT_MARKER]
        offsets: list[tuple[int, int] | None] = [None] * len(token_ids)

        room = self.max_sequence_length - len(token_ids) - 1
        total = 0
        for sentence, (_, base) in zip(ordered, char_starts, strict=True):
            for piece in self.tokenizer.tokenize(sentence.text):
                total += 1
                if total > room:
                    continue
                token_ids.append(piece.id)
                segment_map.append(sentence.id)
                offsets.append((base + piece.start, base + piece.end))
        if total > room:
            logger.debug('Rationale truncated from %d to %d tokens', total, room)

        token_ids.append(SEP_ID)
        segment_map.append(SEGMENT_MARKER)
        offsets.append(None)

        return PackedInput(tuple(token_ids), (0,), tuple(segment_map), tuple(s.id for s in ordered), context_text,
                           tuple(offsets), tuple(char_starts))


class SequenceEncoder(nn.Module):
    """A small transformer encoder with learned positional embeddings.

    Any module producing per-token vectors of width embedding_dim from token ids can stand in for it."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        if config.vocabulary_size <= 0:
            msg = 'vocabulary_size must be set from the tokenizer before building an encoder'
            raise EncoderError(msg)
        self.config = config
        self.token_embedding = nn.Embedding(config.vocabulary_size, config.embedding_dim, padding_idx=PAD_ID)
        self.position_embedding = nn.Embedding(config.max_positions, config.embedding_dim)
        layer = nn.TransformerEncoderLayer(config.embedding_dim, config.head_count, config.feed_forward_dim,
                                           config.dropout, batch_first=True)
        self.layers = nn.TransformerEncoder(layer, config.layer_count, enable_nested_tensor=False)

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim

    def forward(self, token_ids: Tensor, padding_mask: Tensor | None = None, token_weights: Tensor | None = None,
                *, use_positions: bool = True) -> Tensor:
        """Encode a batch of token id sequences.

        :param token_ids: (B, L) token ids.
        :param padding_mask: (B, L) booleans, True at padding positions.
        :param token_weights: (B, L) multipliers applied to the token embeddings before positions are added.
        :param use_positions: Diagnostic switch; False drops the positional embeddings.
        :return: (B, L, embedding_dim) token vectors.
        :raises EncoderError: If an id is outside the vocabulary or the sequence is too long."""
        if token_ids.numel() and (int(token_ids.max()) >= self.config.vocabulary_size or int(token_ids.min()) < 0):
            msg = f'Token id out of vocabulary (size {self.config.vocabulary_size})'
            raise EncoderError(msg)
        if token_ids.shape[1] > self.config.max_positions:
            msg = f'Sequence length {token_ids.shape[1]} exceeds max_positions {self.config.max_positions}'
            raise EncoderError(msg)

        hidden = self.token_embedding(token_ids)
        if token_weights is not None:
            hidden = hidden * token_weights.unsqueeze(-1).to(hidden.dtype)
        if use_positions:
            positions = torch.arange(token_ids.shape[1], device=token_ids.device)
            hidden = hidden + self.position_embedding(positions).unsqueeze(0)
        return self.layers(hidden, src_key_padding_mask=padding_mask)


def encode(packed: PackedInput, encoder: SequenceEncoder, token_weights: Tensor | None = None,
           *, use_positions: bool = True) -> Tensor:
    """Encode one packed input.

    :return: (len(packed), embedding_dim) per-token vectors."""
    token_ids = torch.tensor([packed.token_ids], dtype=torch.long)
    weights = token_weights.unsqueeze(0) if token_weights is not None else None
    return encoder(token_ids, token_weights=weights, use_positions=use_positions)[0]


def batch_token_ids(packed_inputs: Sequence[PackedInput]) -> tuple[Tensor, Tensor]:
    """Right-pad a batch of packed inputs.

    :return: (B, L) token ids and the (B, L) padding mask."""
    length = max(len(p) for p in packed_inputs)
    token_ids = torch.full((len(packed_inputs), length), PAD_ID, dtype=torch.long)
    padding_mask = torch.ones((len(packed_inputs), length), dtype=torch.bool)
    for row, packed in enumerate(packed_inputs):
        token_ids[row, :len(packed)] = torch.tensor(packed.token_ids, dtype=torch.long)
        padding_mask[row, :len(packed)] = False
    return token_ids, padding_mask
