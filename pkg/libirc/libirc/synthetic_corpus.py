"""Seed-deterministic two-hop template corpora."""

import logging
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .constants import AnswerLabel
from .corpus import AnswerTarget, Example, Passage, align_answer_span, resolve_supporting_facts
from .exceptions import SyntheticSpecError
from .internal import derive_seed

logger = logging.getLogger(__name__)

RELATIONS = ('capital', 'founder', 'mentor', 'rival', 'creator', 'neighbor', 'patron', 'successor')
_CONSONANTS = 'bdfgklmnprstvz'
_VOWELS = 'aeiou'
_SYLLABLES_PER_NAME = 3


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a synthetic corpus.

    Each passage holds two gold paragraphs (the query entity's and the bridge entity's)
    plus paragraphs_per_passage - 2 distractor paragraphs."""

    num_examples: int = 200
    entity_vocabulary_size: int = 500
    relations: tuple[str, ...] = RELATIONS
    paragraphs_per_passage: int = 4
    sentences_per_paragraph: int = 3
    cna_fraction: float = 0.3
    yes_no_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.cna_fraction <= 1.0 or not 0.0 <= self.yes_no_fraction <= 1.0:
            msg = 'cna_fraction and yes_no_fraction must lie in [0, 1]'
            raise SyntheticSpecError(msg)
        if self.num_examples < 0 or self.paragraphs_per_passage < 2 or self.sentences_per_paragraph < 1:
            msg = 'Need num_examples >= 0, at least 2 paragraphs and 1 sentence per paragraph'
            raise SyntheticSpecError(msg)
        if len(set(self.relations)) < 2:
            msg = 'Need at least 2 distinct relations'
            raise SyntheticSpecError(msg)

    @property
    def entities_per_example(self) -> int:
        """Distinct entities one example draws: query, bridge, answer, a yes/no foil,
        filler objects and the distractor paragraphs' subjects and objects."""
        fillers = 2 * (self.sentences_per_paragraph - 1)
        distractors = (self.paragraphs_per_passage - 2) * (1 + self.sentences_per_paragraph)
        return 4 + fillers + distractors


def entity_names(size: int, seed: int) -> list[str]:
    """size distinct capitalized pseudo-words of equal length."""
    available = (len(_CONSONANTS) * len(_VOWELS)) ** _SYLLABLES_PER_NAME
    if size > available:
        msg = f'Cannot build {size} distinct entity names from {available} syllable combinations'
        raise SyntheticSpecError(msg)
    syllables = [c + v for c, v in product(_CONSONANTS, _VOWELS)]
    rng = np.random.default_rng(derive_seed(seed, 'entities'))
    names = []
    for code in rng.choice(available, size=size, replace=False):
        parts = []
        for _ in range(_SYLLABLES_PER_NAME):
            code, digit = divmod(int(code), len(syllables))
            parts.append(syllables[digit])
        names.append(''.join(parts).capitalize())
    return names


def relation_sentence(relation: str, subject: str, obj: str) -> str:
    return f'The {relation} of {subject} is {obj}.'


def generate(spec: SyntheticSpec) -> list[Example]:
    """Generate spec.num_examples examples.

    Exactly round(cna_fraction * num_examples) examples are CNA and, independently,
    round(yes_no_fraction * num_examples) ask a yes/no question.

    :raises SyntheticSpecError: If the entity vocabulary is too small for one example."""
    if spec.entity_vocabulary_size < spec.entities_per_example:
        msg = (f'An entity vocabulary of {spec.entity_vocabulary_size} cannot fill an example that needs '
               f'{spec.entities_per_example} distinct entities')
        raise SyntheticSpecError(msg)

    names = entity_names(spec.entity_vocabulary_size, spec.seed)
    rng = np.random.default_rng(spec.seed)
    cna_ids = set(rng.permutation(spec.num_examples)[:round(spec.cna_fraction * spec.num_examples)].tolist())
    yes_no_ids = set(rng.permutation(spec.num_examples)[:round(spec.yes_no_fraction * spec.num_examples)].tolist())

    examples = [_generate_example(spec, names, i, cna=i in cna_ids, yes_no=i in yes_no_ids)
                for i in range(spec.num_examples)]
    logger.info('Generated %d synthetic examples (%d CNA)', len(examples), len(cna_ids))
    return examples


def _generate_example(spec: SyntheticSpec, names: list[str], number: int, *, cna: bool, yes_no: bool) -> Example:
    rng = np.random.default_rng(derive_seed(spec.seed, 'example', number))
    picked = [names[int(i)] for i in rng.choice(len(names), size=spec.entities_per_example, replace=False)]
    query_entity, bridge, answer, foil = picked[:4]
    pool = iter(picked[4:])
    relations = list(spec.relations)
    first_hop, second_hop = (relations[int(i)] for i in rng.choice(len(relations), size=2, replace=False))

    def other_relation(excluded: str) -> str:
        choices = [r for r in relations if r != excluded]
        return choices[int(rng.integers(len(choices)))]

    def gold_paragraph(subject: str, relation: str, obj: str) -> tuple[list[str], int]:
        sentences = [relation_sentence(other_relation(relation), subject, next(pool))
                     for _ in range(spec.sentences_per_paragraph - 1)]
        position = int(rng.integers(spec.sentences_per_paragraph))
        sentences.insert(position, relation_sentence(relation, subject, obj))
        return sentences, position

    first_sentences, first_position = gold_paragraph(query_entity, first_hop, bridge)
    second_sentences, second_position = gold_paragraph(bridge, second_hop, answer)
    paragraphs = [(query_entity, first_sentences), (bridge, second_sentences)]
    for _ in range(spec.paragraphs_per_passage - 2):
        subject = next(pool)
        sentences = [relation_sentence(relations[int(rng.integers(len(relations)))], subject, next(pool))
                     for _ in range(spec.sentences_per_paragraph)]
        paragraphs.append((subject, sentences))

    supporting_facts = ((query_entity, first_position), (bridge, second_position))
    positioned = [(title, list(enumerate(sentences))) for title, sentences in paragraphs]
    if cna:
        omitted = int(rng.integers(2))
        positioned[omitted][1].pop(supporting_facts[omitted][1])
    order = rng.permutation(len(positioned))
    passage = Passage.from_positioned(positioned[int(i)] for i in order)

    if yes_no:
        asked = answer if rng.random() < 0.5 else foil
        query = f'Is the {second_hop} of the {first_hop} of {query_entity} {asked}?'
        gold_answer = AnswerTarget(AnswerLabel.YES if asked == answer else AnswerLabel.NO)
    else:
        query = f'What is the {second_hop} of the {first_hop} of {query_entity}?'
        gold_answer = AnswerTarget(AnswerLabel.SPAN, answer)
    if cna:
        gold_answer = AnswerTarget(AnswerLabel.CNA)

    rationale, _ = resolve_supporting_facts(passage, supporting_facts)
    example = Example(id=f'syn-{spec.seed}-{number:05d}',
                      query=query,
                      passage=passage,
                      gold_answer=gold_answer,
                      gold_rationale=rationale,
                      gold_paragraph_titles=frozenset((query_entity, bridge)),
                      supporting_facts=supporting_facts)
    if gold_answer.label == AnswerLabel.SPAN:
        example = replace(example, gold_answer=align_answer_span(example))
    _verify(example, (query_entity, first_hop), (bridge, second_hop), answer, cna=cna)
    return example


def _verify(example: Example, first_link: tuple[str, str], second_link: tuple[str, str], answer: str,
            *, cna: bool) -> None:
    """Check the two-hop structure: each hop is stated by exactly one sentence, and the answer
    appears nowhere but in the second-hop sentence."""
    texts = {s.id: s.text for s in example.passage.sentences}
    first_prefix = f'The {first_link[1]} of {first_link[0]} is '
    second_prefix = f'The {second_link[1]} of {second_link[0]} is '
    first = [i for i, text in texts.items() if text.startswith(first_prefix)]
    second = [i for i, text in texts.items() if text.startswith(second_prefix)]

    expected_rationale = 1 if cna else 2
    if len(first) + len(second) != expected_rationale or len(first) > 1 or len(second) > 1:
        msg = f'{example.id}: each hop must be stated by exactly one sentence'
        raise SyntheticSpecError(msg)
    if example.gold_rationale != frozenset(first + second):
        msg = f'{example.id}: gold rationale does not match the hop sentences'
        raise SyntheticSpecError(msg)
    if not cna and any(answer in text for i, text in texts.items() if i not in second):
        msg = f'{example.id}: the answer leaks into a distractor sentence'
        raise SyntheticSpecError(msg)
