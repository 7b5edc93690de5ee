"""Shared data model and HotpotQA ingestion."""

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

from .constants import FLAG_SPAN_UNALIGNABLE, FLAG_UNRESOLVABLE_SF, MAX_PARAGRAPHS, AnswerLabel
from .exceptions import CorpusError, IngestionError

logger = logging.getLogger(__name__)

Rationale = frozenset[int]
SupportingFact = tuple[str, int]


def normalize_whitespace(text: str) -> str:
    """Collapse runs of whitespace to single spaces and strip the edges."""
    return ' '.join(text.split())


@dataclass(frozen=True)
class Sentence:
    """A sentence with its passage-global id and its index inside its paragraph."""

    id: int
    paragraph_title: str
    position: int
    text: str


@dataclass(frozen=True)
class Paragraph:
    title: str
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Passage:
    """Ordered paragraphs whose sentences carry ids 0..N^s-1 in reading order."""

    paragraphs: tuple[Paragraph, ...]

    @classmethod
    def from_paragraphs(cls, paragraphs: Iterable[tuple[str, Sequence[str]]]) -> 'Passage':
        """Build a passage from (title, sentence texts) pairs, assigning global sentence ids.

        Sentences that are empty after whitespace normalization are skipped; the remaining
        sentences keep their original position so supporting facts still resolve.

        :param paragraphs: Ordered (title, sentences) pairs.
        :return: The indexed passage."""
        return cls.from_positioned((title, list(enumerate(texts))) for title, texts in paragraphs)

    @classmethod
    def from_positioned(cls, paragraphs: Iterable[tuple[str, Sequence[tuple[int, str]]]]) -> 'Passage':
        next_id = 0
        built: list[Paragraph] = []
        for title, sentences in paragraphs:
            kept: list[Sentence] = []
            for position, text in sentences:
                normalized = normalize_whitespace(text)
                if not normalized:
                    continue
                kept.append(Sentence(next_id, title, position, normalized))
                next_id += 1
            built.append(Paragraph(title, tuple(kept)))
        return cls(tuple(built))

    @property
    def paragraph_count(self) -> int:
        return len(self.paragraphs)

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    @cached_property
    def sentences(self) -> tuple[Sentence, ...]:
        return tuple(sentence for paragraph in self.paragraphs for sentence in paragraph.sentences)

    @cached_property
    def _by_title_position(self) -> dict[SupportingFact, Sentence]:
        return {(s.paragraph_title, s.position): s for s in self.sentences}

    def sentence(self, sentence_id: int) -> Sentence:
        return self.sentences[sentence_id]

    def find(self, title: str, position: int) -> Sentence | None:
        return self._by_title_position.get((title, position))

    def titles(self) -> list[str]:
        return [paragraph.title for paragraph in self.paragraphs]

    def select(self, indices: Sequence[int]) -> tuple['Passage', dict[int, int]]:
        """Build a sub-passage from the given paragraph indices, renumbering sentence ids.

        :param indices: Paragraph indices to keep, in the order they should appear.
        :return: The sub-passage and a map from old sentence ids to new ones."""
        id_map: dict[int, int] = {}
        paragraphs: list[Paragraph] = []
        next_id = 0
        for index in indices:
            paragraph = self.paragraphs[index]
            sentences = []
            for sentence in paragraph.sentences:
                id_map[sentence.id] = next_id
                sentences.append(replace(sentence, id=next_id))
                next_id += 1
            paragraphs.append(Paragraph(paragraph.title, tuple(sentences)))
        return Passage(tuple(paragraphs)), id_map


@dataclass(frozen=True)
class AnswerTarget:
    """A gold answer: a label, plus the aligned span when the label is Span."""

    label: AnswerLabel
    span_text: str | None = None
    span_sentence_id: int | None = None
    span_char_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.label == AnswerLabel.SPAN and not self.span_text:
            msg = 'A Span answer needs span text'
            raise CorpusError(msg)
        if self.label != AnswerLabel.SPAN and (self.span_text is not None or self.span_char_range is not None):
            msg = f'A {self.label} answer cannot carry a span'
            raise CorpusError(msg)

    def as_cna(self) -> 'AnswerTarget':
        return AnswerTarget(AnswerLabel.CNA)


@dataclass(frozen=True)
class Example:
    """One QA instance."""

    id: str
    query: str
    passage: Passage
    gold_answer: AnswerTarget
    gold_rationale: Rationale
    gold_paragraph_titles: frozenset[str]
    supporting_facts: tuple[SupportingFact, ...] = ()
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if any(not 0 <= i < self.passage.sentence_count for i in self.gold_rationale):
            msg = f'Example {self.id} has a gold rationale outside the passage'
            raise CorpusError(msg)

    @property
    def absent_sf_count(self) -> int:
        """Number of annotated supporting facts that are not present in the passage."""
        return max(0, len(self.supporting_facts) - len(self.gold_rationale))

    def gold_paragraph_indices(self) -> list[int]:
        return [i for i, title in enumerate(self.passage.titles()) if title in self.gold_paragraph_titles]

    def restrict_to_paragraphs(self, indices: Sequence[int]) -> 'Example':
        """View this example over a subset of its paragraphs, remapping sentence ids.

        :param indices: Paragraph indices to keep, in order.
        :return: A new Example whose rationale and span refer to the sub-passage."""
        passage, id_map = self.passage.select(indices)
        rationale = frozenset(id_map[i] for i in self.gold_rationale if i in id_map)

        answer = self.gold_answer
        if answer.label == AnswerLabel.SPAN and answer.span_sentence_id is not None:
            if answer.span_sentence_id in id_map:
                answer = replace(answer, span_sentence_id=id_map[answer.span_sentence_id])
            else:
                answer = AnswerTarget(AnswerLabel.SPAN, answer.span_text)

        restricted = replace(self, passage=passage, gold_rationale=rationale, gold_answer=answer)
        if answer.label == AnswerLabel.SPAN and answer.span_char_range is None:
            return _with_alignment(restricted)
        return restricted

    def with_passage(self, passage: Passage) -> 'Example':
        """Replace the passage, re-resolving supporting facts and the answer span against it."""
        rationale, missing = resolve_supporting_facts(passage, self.supporting_facts)
        flags = self.flags - {FLAG_UNRESOLVABLE_SF, FLAG_SPAN_UNALIGNABLE}
        if missing:
            flags |= {FLAG_UNRESOLVABLE_SF}
        answer = self.gold_answer
        if answer.label == AnswerLabel.SPAN:
            answer = AnswerTarget(AnswerLabel.SPAN, answer.span_text)
        updated = replace(self, passage=passage, gold_rationale=rationale, gold_answer=answer, flags=flags)
        return _with_alignment(updated) if answer.label == AnswerLabel.SPAN else updated

    def to_dict(self) -> dict[str, Any]:
        answer = self.gold_answer
        return {
            'id': self.id,
            'query': self.query,
            'paragraphs': [
                {'title': p.title, 'sentences': [[s.position, s.text] for s in p.sentences]}
                for p in self.passage.paragraphs
            ],
            'answer': {
                'label': str(answer.label),
                'span_text': answer.span_text,
                'span_sentence_id': answer.span_sentence_id,
                'span_char_range': list(answer.span_char_range) if answer.span_char_range else None,
            },
            'gold_rationale': sorted(self.gold_rationale),
            'gold_paragraph_titles': sorted(self.gold_paragraph_titles),
            'supporting_facts': [list(sf) for sf in self.supporting_facts],
            'flags': sorted(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'Example':
        passage = Passage.from_positioned(
            (p['title'], [(position, text) for position, text in p['sentences']]) for p in data['paragraphs'])
        answer_data = data['answer']
        char_range = answer_data.get('span_char_range')
        answer = AnswerTarget(AnswerLabel(answer_data['label']),
                              answer_data.get('span_text'),
                              answer_data.get('span_sentence_id'),
                              tuple(char_range) if char_range else None)
        return cls(id=data['id'],
                   query=data['query'],
                   passage=passage,
                   gold_answer=answer,
                   gold_rationale=frozenset(data['gold_rationale']),
                   gold_paragraph_titles=frozenset(data['gold_paragraph_titles']),
                   supporting_facts=tuple((title, position) for title, position in data['supporting_facts']),
                   flags=frozenset(data.get('flags', ())))


def resolve_supporting_facts(passage: Passage, supporting_facts: Iterable[SupportingFact]) -> tuple[Rationale, int]:
    """Resolve (title, sentence index) pairs to global sentence ids.

    :return: The resolved ids and the number of pairs that did not resolve."""
    resolved: set[int] = set()
    missing = 0
    for title, position in supporting_facts:
        sentence = passage.find(title, position)
        if sentence is None:
            missing += 1
        else:
            resolved.add(sentence.id)
    return frozenset(resolved), missing


def align_answer_span(example: Example) -> AnswerTarget:
    """Locate the gold span text inside the passage.

    Gold-rationale sentences are searched first in id order, then the whole passage.
    The first occurrence wins.

    :param example: An example whose gold label is Span.
    :return: The target with span_sentence_id and span_char_range set, or unset when no sentence contains
        the span (the caller flags the example).
    :raises CorpusError: If the example's label is not Span."""
    answer = example.gold_answer
    if answer.label != AnswerLabel.SPAN:
        msg = f'Example {example.id} has no span to align'
        raise CorpusError(msg)

    span_text = normalize_whitespace(answer.span_text or '')
    sentences = example.passage.sentences
    gold_first = ([sentences[i] for i in sorted(example.gold_rationale)]
                  + [s for s in sentences if s.id not in example.gold_rationale])

    for sentence in gold_first:
        start = sentence.text.find(span_text)
        if start >= 0:
            return AnswerTarget(AnswerLabel.SPAN, span_text, sentence.id, (start, start + len(span_text)))

    return AnswerTarget(AnswerLabel.SPAN, span_text)


def answer_sentences(example: Example) -> Rationale:
    """Ids of the sentences containing the gold answer span (empty for non-Span answers)."""
    answer = example.gold_answer
    if answer.label != AnswerLabel.SPAN or not answer.span_text:
        return frozenset()
    return frozenset(s.id for s in example.passage.sentences if answer.span_text in s.text)


def _with_alignment(example: Example) -> Example:
    aligned = align_answer_span(example)
    flags = example.flags
    if aligned.span_char_range is None:
        flags |= {FLAG_SPAN_UNALIGNABLE}
        logger.debug('Answer span of %s not found in passage', example.id)
    return replace(example, gold_answer=aligned, flags=flags)


def _answer_from_string(answer: str) -> AnswerTarget:
    normalized = normalize_whitespace(answer)
    match normalized.lower():
        case 'yes':
            return AnswerTarget(AnswerLabel.YES)
        case 'no':
            return AnswerTarget(AnswerLabel.NO)
        case _:
            return AnswerTarget(AnswerLabel.SPAN, normalized)


def example_from_hotpot_record(record: dict[str, Any]) -> Example:
    """Convert one HotpotQA record into an Example.

    :raises KeyError: If a required field is missing.
    :raises TypeError: If a field has the wrong shape.
    :raises ValueError: If the record has more than MAX_PARAGRAPHS paragraphs."""
    if len(record['context']) > MAX_PARAGRAPHS:
        msg = f'{len(record["context"])} paragraphs, at most {MAX_PARAGRAPHS} allowed'
        raise ValueError(msg)
    passage = Passage.from_paragraphs((title, sentences) for title, sentences in record['context'])

    supporting_facts = tuple(dict.fromkeys((title, int(position))
                                           for title, position in record.get('supporting_facts', [])))
    rationale, missing = resolve_supporting_facts(passage, supporting_facts)
    flags: frozenset[str] = frozenset()
    if missing:
        flags |= {FLAG_UNRESOLVABLE_SF}
        logger.debug('Example %s has %d unresolvable supporting facts', record['_id'], missing)

    example = Example(id=str(record['_id']),
                      query=normalize_whitespace(record['question']),
                      passage=passage,
                      gold_answer=_answer_from_string(record['answer']),
                      gold_rationale=rationale,
                      gold_paragraph_titles=frozenset(title for title, _ in supporting_facts),
                      supporting_facts=supporting_facts,
                      flags=flags)

    if example.gold_answer.label == AnswerLabel.SPAN:
        example = _with_alignment(example)
    return example


def load_hotpot_file(path: str | Path) -> list[Example]:
    """Load a HotpotQA-format JSON file.

    :param path: Path to a JSON array of HotpotQA records.
    :return: One Example per record.
    :raises IngestionError: If the file is not valid JSON or a record is malformed."""
    try:
        with Path(path).open(encoding='utf-8') as f:
            records = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IngestionError(str(path), str(e)) from e

    if not isinstance(records, list):
        raise IngestionError(str(path), 'expected a JSON array of records')

    examples: list[Example] = []
    for i, record in enumerate(records):
        try:
            examples.append(example_from_hotpot_record(record))
        except (KeyError, TypeError, ValueError) as e:
            raise IngestionError(str(path), f'record {i} is malformed ({e!r})') from e

    flagged = sum(1 for e in examples if FLAG_UNRESOLVABLE_SF in e.flags)
    if flagged:
        logger.warning('%d of %d examples in %s have unresolvable supporting facts', flagged, len(examples), path)
    unalignable = sum(1 for e in examples if FLAG_SPAN_UNALIGNABLE in e.flags)
    if unalignable:
        logger.warning('%d of %d examples in %s have unalignable answer spans', unalignable, len(examples), path)

    return examples


def write_examples(path: str | Path, examples: Iterable[Example]) -> int:
    """Write examples as JSON Lines.

    :return: The number of examples written."""
    count = 0
    with Path(path).open('w', encoding='utf-8') as f:
        for example in examples:
            f.write(json.dumps(example.to_dict(), ensure_ascii=False))
            f.write('\n')
            count += 1
    return count


def read_examples(path: str | Path) -> list[Example]:
    """Read examples written by `write_examples`.

    :raises IngestionError: If a line is not a valid example."""
    examples: list[Example] = []
    try:
        with Path(path).open(encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    examples.append(Example.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise IngestionError(str(path), f'line {line_number} is malformed ({e!r})') from e
    except OSError as e:
        raise IngestionError(str(path), str(e)) from e
    return examples


def load_dataset(path: str | Path) -> list[Example]:
    """Load either the internal JSON Lines format or a HotpotQA JSON file, by extension."""
    if Path(path).suffix == '.jsonl':
        return read_examples(path)
    return load_hotpot_file(path)
