"""Paragraph relevance scoring for paragraph-pair selection."""

import torch
from torch import Tensor, nn

from .config import EncoderConfig
from .constants import LOGIT_CAP
from .corpus import Paragraph, Passage
from .encoder import Packer, PackedInput, SequenceEncoder, batch_token_ids


class ParagraphRanker(nn.Module):
    """Scores a (query, paragraph) pair from the [CLS_Q] row of its extraction packing."""

    def __init__(self, encoder_config: EncoderConfig) -> None:
        super().__init__()
        self.encoder = SequenceEncoder(encoder_config)
        self.head = nn.Linear(encoder_config.embedding_dim, 1)

    def forward(self, packed_inputs: list[PackedInput]) -> Tensor:
        """:return: (P,) relevance logits, one per packed paragraph."""
        token_ids, padding_mask = batch_token_ids(packed_inputs)
        hidden = self.encoder(token_ids, padding_mask)
        return self.head(hidden[:, 0]).squeeze(-1).clamp(-LOGIT_CAP, LOGIT_CAP)

    def pack(self, packer: Packer, query: str, paragraph: Paragraph) -> PackedInput:
        return packer.pack_extraction_input(query, paragraph.sentences)

    def score_paragraphs(self, query: str, passage: Passage, packer: Packer) -> list[float]:
        """Relevance S_i in (0, 1) of every paragraph of the passage.

        Paragraphs without sentences get the lowest possible score."""
        floor = float(torch.sigmoid(torch.tensor(-LOGIT_CAP)))
        scores = [floor] * passage.paragraph_count
        scored = [i for i, paragraph in enumerate(passage.paragraphs) if paragraph.sentences]
        if not scored:
            return scores

        was_training = self.training
        self.eval()
        with torch.no_grad():
            logits = self([self.pack(packer, query, passage.paragraphs[i]) for i in scored])
        self.train(was_training)

        for i, probability in zip(scored, torch.sigmoid(logits).tolist(), strict=True):
            scores[i] = probability
        return scores
