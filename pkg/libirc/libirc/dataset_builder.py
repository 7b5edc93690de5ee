"""Fullwiki+CNA labelling, the TF-IDF index and negative-sampling augmentation."""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

from .constants import ABSENT_SF_CLASSES, FLAG_AUGMENTED_CNA, FLAG_SPAN_UNALIGNABLE, AnswerLabel
from .corpus import AnswerTarget, Example
from .exceptions import DatasetBuildError
from .internal import derive_seed

logger = logging.getLogger(__name__)

AUGMENTED_ID_SUFFIX = '#cna'


def absent_sf_class(absent: int) -> str:
    return ABSENT_SF_CLASSES[min(absent, len(ABSENT_SF_CLASSES) - 1)]


@dataclass
class CnaStats:
    """Distribution of examples over the absent-SF classes."""

    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(ABSENT_SF_CLASSES, 0))

    def add(self, absent: int) -> None:
        self.counts[absent_sf_class(absent)] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def cna_count(self) -> int:
        return self.total - self.counts[ABSENT_SF_CLASSES[0]]

    def to_dict(self) -> dict[str, object]:
        return {'counts': dict(self.counts), 'total': self.total, 'cna': self.cna_count}


def build_fullwiki_cna(examples: Iterable[Example]) -> tuple[list[Example], CnaStats]:
    """Relabel retrieved-passage examples whose supporting facts are not all present as CNA.

    Examples with no annotated supporting facts cannot be labelled and are excluded.

    :param examples: Examples whose passages come from retrieval.
    :return: The labelled examples and the absent-SF class counts."""
    stats = CnaStats()
    labelled: list[Example] = []
    excluded = 0
    for example in examples:
        if not example.supporting_facts:
            excluded += 1
            continue
        absent = example.absent_sf_count
        stats.add(absent)
        if absent > 0:
            example = replace(example, gold_answer=example.gold_answer.as_cna(),
                              flags=example.flags - {FLAG_SPAN_UNALIGNABLE})
        labelled.append(example)

    if excluded:
        logger.warning('Excluded %d examples without supporting facts', excluded)
    logger.info('Fullwiki+CNA: %d examples, %d labelled CNA', stats.total, stats.cna_count)
    return labelled, stats


def attach_retrievals(examples: Iterable[Example], retrieved: Iterable[Example]) -> list[Example]:
    """Swap each annotated example's passage for the retrieved passage with the same id.

    Supporting facts and the answer span are re-resolved against the retrieved passage.
    Examples without a retrieval are dropped."""
    passages = {r.id: r.passage for r in retrieved}
    attached: list[Example] = []
    missing = 0
    for example in examples:
        passage = passages.get(example.id)
        if passage is None:
            missing += 1
            continue
        attached.append(example.with_passage(passage))
    if missing:
        logger.warning('%d examples have no retrieved passage and were dropped', missing)
    return attached


class TfidfIndex:
    """Lowercased, punctuation-stripped TF-IDF over sentences with idf = ln(N / (1 + df)) + 1.

    Vectors are L2-normalized, so dot products are cosine similarities."""

    def __init__(self, ngram_max: int = 1) -> None:
        self.ngram_max = ngram_max
        self._vectorizer = CountVectorizer(lowercase=True, token_pattern=r'(?u)\b\w+\b',
                                           ngram_range=(1, ngram_max))
        self.idf: np.ndarray | None = None

    @classmethod
    def from_examples(cls, examples: Iterable[Example], ngram_max: int = 1) -> 'TfidfIndex':
        texts = list(dict.fromkeys(s.text for example in examples for s in example.passage.sentences))
        return cls(ngram_max).fit(texts)

    @property
    def vocabulary(self) -> dict[str, int]:
        return dict(getattr(self._vectorizer, 'vocabulary_', {}))

    def fit(self, documents: Sequence[str]) -> 'TfidfIndex':
        """Learn the vocabulary and document frequencies.

        :raises DatasetBuildError: If the documents hold no word at all."""
        try:
            counts = self._vectorizer.fit_transform(documents)
        except ValueError as e:
            msg = f'Cannot build a TF-IDF index: {e}'
            raise DatasetBuildError(msg) from e
        document_frequency = np.bincount(counts.indices, minlength=counts.shape[1])
        self.idf = np.log(counts.shape[0] / (1.0 + document_frequency)) + 1.0
        return self

    def transform(self, texts: Sequence[str]) -> csr_matrix:
        if self.idf is None:
            msg = 'TF-IDF index used before fit'
            raise DatasetBuildError(msg)
        counts = self._vectorizer.transform(texts)
        return normalize(csr_matrix(counts.multiply(self.idf)))

    def similarities(self, query: str, texts: Sequence[str]) -> np.ndarray:
        """Cosine similarity between the query and each text."""
        if not texts:
            return np.zeros(0)
        return (self.transform(texts) @ self.transform([query]).T).toarray().ravel()


def hardest_negative_paragraph(example: Example, index: TfidfIndex) -> int | None:
    """Index of the non-gold paragraph holding the sentence most TF-IDF-similar to the query.

    Ties go to the lowest paragraph index, then the lowest sentence index.

    :return: The paragraph index, or None if the passage has no non-gold sentence."""
    gold = set(example.gold_paragraph_indices())
    candidates = [(i, sentence.text) for i, paragraph in enumerate(example.passage.paragraphs) if i not in gold
                  for sentence in paragraph.sentences]
    if not candidates:
        return None
    similarities = index.similarities(example.query, [text for _, text in candidates])
    return candidates[int(np.argmax(similarities))][0]


def negative_sample_cna(example: Example, index: TfidfIndex, seed: int) -> Example | None:
    """Build a CNA example by replacing one gold paragraph with the hardest negative paragraph.

    The replaced gold paragraph is chosen at random from a stream derived from seed and the example id.
    The gold rationale keeps the gold sentences that remain.

    :return: The augmented example, or None when the passage has no gold or no non-gold paragraph."""
    gold_indices = example.gold_paragraph_indices()
    if not gold_indices:
        logger.warning('Example %s has no gold paragraph in its passage; no CNA augmentation', example.id)
        return None
    negative = hardest_negative_paragraph(example, index)
    if negative is None:
        logger.warning('Example %s has no non-gold paragraph; no CNA augmentation', example.id)
        return None

    rng = np.random.default_rng(derive_seed(seed, 'negative_sample', example.id))
    replaced = gold_indices[int(rng.integers(len(gold_indices)))]
    order = [negative if i == replaced else i for i in gold_indices]

    passage, id_map = example.passage.select(order)
    return replace(example,
                   id=f'{example.id}{AUGMENTED_ID_SUFFIX}',
                   passage=passage,
                   gold_answer=AnswerTarget(AnswerLabel.CNA),
                   gold_rationale=frozenset(id_map[i] for i in example.gold_rationale if i in id_map),
                   flags=(example.flags - {FLAG_SPAN_UNALIGNABLE}) | {FLAG_AUGMENTED_CNA})


def augment_with_cna(examples: Sequence[Example], index: TfidfIndex, seed: int) -> list[Example]:
    """One negative-sampled CNA example per input example, where one can be built."""
    augmented = [a for a in (negative_sample_cna(e, index, seed) for e in examples) if a is not None]
    logger.info('Built %d CNA examples from %d examples', len(augmented), len(examples))
    return augmented
