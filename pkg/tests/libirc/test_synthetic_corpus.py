from collections import Counter

from libirc.constants import AnswerLabel
from libirc.corpus import Example, answer_sentences
from libirc.exceptions import SyntheticSpecError
from libirc.synthetic_corpus import SyntheticSpec, entity_names, generate
from pytest import mark, raises


def test_cna_fraction_is_exact() -> None:
    examples = generate(SyntheticSpec(num_examples=200, cna_fraction=0.5, seed=1))

    assert Counter(e.gold_answer.label == AnswerLabel.CNA for e in examples) == {True: 100, False: 100}


def test_generation_is_deterministic() -> None:
    spec = SyntheticSpec(num_examples=20, yes_no_fraction=0.3, seed=3)

    assert generate(spec) == generate(spec)
    assert generate(spec) != generate(SyntheticSpec(num_examples=20, yes_no_fraction=0.3, seed=4))


def test_example_structure(synthetic_spec: SyntheticSpec, synthetic_examples: list[Example]) -> None:
    assert [e.id for e in synthetic_examples] == [f'syn-7-{n:05d}' for n in range(synthetic_spec.num_examples)]
    for example in synthetic_examples:
        passage = example.passage
        assert passage.paragraph_count == synthetic_spec.paragraphs_per_passage
        assert len(example.gold_paragraph_indices()) == 2
        assert len(example.supporting_facts) == 2
        if example.gold_answer.label == AnswerLabel.CNA:
            assert len(example.gold_rationale) == 1
            assert example.absent_sf_count == 1
            assert passage.sentence_count == synthetic_spec.paragraphs_per_passage * 3 - 1
        else:
            assert len(example.gold_rationale) == 2
            assert example.absent_sf_count == 0
            assert passage.sentence_count == synthetic_spec.paragraphs_per_passage * 3


def test_span_answers_sit_in_the_rationale(synthetic_examples: list[Example]) -> None:
    spans = [e for e in synthetic_examples if e.gold_answer.label == AnswerLabel.SPAN]

    assert spans
    for example in spans:
        assert example.gold_answer.span_sentence_id in example.gold_rationale
        assert answer_sentences(example) == {example.gold_answer.span_sentence_id}
        start, end = example.gold_answer.span_char_range
        assert example.passage.sentence(example.gold_answer.span_sentence_id).text[start:end] == \
            example.gold_answer.span_text


def test_yes_no_fraction(synthetic_examples: list[Example]) -> None:
    labels = Counter(e.gold_answer.label for e in synthetic_examples)

    assert labels[AnswerLabel.CNA] == 3
    assert labels[AnswerLabel.YES] + labels[AnswerLabel.NO] <= 3
    assert sum(labels.values()) == 12


def test_entities_per_example() -> None:
    assert SyntheticSpec(paragraphs_per_passage=4, sentences_per_paragraph=3).entities_per_example == 16
    assert SyntheticSpec(paragraphs_per_passage=2, sentences_per_paragraph=1).entities_per_example == 4


def test_entity_vocabulary_too_small() -> None:
    with raises(SyntheticSpecError):
        generate(SyntheticSpec(num_examples=1, entity_vocabulary_size=15))


def test_entity_names() -> None:
    names = entity_names(50, seed=0)

    assert len(set(names)) == 50
    assert len({len(name) for name in names}) == 1
    assert all(name[0].isupper() and name[1:].islower() for name in names)
    assert names == entity_names(50, seed=0)


def test_too_many_entity_names() -> None:
    with raises(SyntheticSpecError):
        entity_names(10 ** 6, seed=0)


@mark.parametrize('overrides', [
    {'cna_fraction': 1.5},
    {'yes_no_fraction': -0.1},
    {'paragraphs_per_passage': 1},
    {'sentences_per_paragraph': 0},
    {'num_examples': -1},
    {'relations': ('capital', 'capital')},
])
def test_invalid_spec(overrides: dict) -> None:
    with raises(SyntheticSpecError):
        SyntheticSpec(**overrides)


def test_empty_corpus() -> None:
    assert generate(SyntheticSpec(num_examples=0)) == []
