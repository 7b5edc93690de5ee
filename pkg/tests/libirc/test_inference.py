import json
import random
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

import torch
from libirc.answer_module import AnswerPrediction
from libirc.checkpoint import CheckpointStore
from libirc.constants import CNA_ANSWER, AnswerLabel
from libirc.corpus import Example, Passage, Sentence
from libirc.encoder import Packer
from libirc.exceptions import InferenceError
from libirc.extraction_module import SentenceScores
from libirc.inference import (ParagraphPairScore, Pipeline, PredictionCandidate, Prediction, prediction_record,
                              rank_pairs, rerank_and_answer, run_pipeline, write_predictions)
from libirc.ranker import ParagraphRanker
from pytest import fixture, raises

CNA = AnswerPrediction(AnswerLabel.CNA, None, 0.9)
YES = AnswerPrediction(AnswerLabel.YES, None, 0.1)


@fixture
def eight_sentences() -> Passage:
    return Passage.from_paragraphs([('A', [f'Sentence a{i}.' for i in range(4)]),
                                    ('B', [f'Sentence b{i}.' for i in range(4)])])


def _scorer(probs: Sequence[float]):  # noqa: ANN202
    def score(_: str, sentences: Sequence[Sentence]) -> SentenceScores:
        p = torch.tensor([probs[s.id] for s in sentences], dtype=torch.float64)
        return SentenceScores(tuple(s.id for s in sentences), torch.log(p) - torch.log1p(-p), p)
    return score


class RecordingReader:
    """Answers CNA until the rationale reaches a given size."""

    def __init__(self, answer_at: int | None = None) -> None:
        self.answer_at = answer_at
        self.calls: list[list[int]] = []

    def __call__(self, _: str, sentences: Sequence[Sentence]) -> AnswerPrediction:
        self.calls.append([s.id for s in sentences])
        if self.answer_at is not None and len(sentences) >= self.answer_at:
            return YES
        return CNA


def _candidate(pair_score: float, answer: AnswerPrediction, rationale: set[int]) -> PredictionCandidate:
    return PredictionCandidate((0, 1), pair_score, answer, frozenset(rationale), (frozenset(rationale),))


def test_rank_pairs_counts_all_pairs() -> None:
    pairs = rank_pairs([0.1 * i for i in range(10)], k=100)

    assert len(pairs) == 45


def test_rank_pairs_top_k() -> None:
    pairs = rank_pairs([0.1, 0.95, 0.2, 0.9, 0.05], k=3)

    assert len(pairs) == 3
    assert pairs[0].pair == (1, 3)
    assert pairs[0].score == 0.95 + 0.9


def test_rank_pairs_ties_are_lexicographic() -> None:
    pairs = rank_pairs([0.5] * 4, k=4)

    assert [p.pair for p in pairs] == [(0, 1), (0, 2), (0, 3), (1, 2)]


def test_rank_pairs_needs_two_paragraphs() -> None:
    with raises(InferenceError):
        rank_pairs([0.3], k=3)


def test_run_pipeline_without_growth(eight_sentences: Passage) -> None:
    reader = RecordingReader(answer_at=0)
    pair = ParagraphPairScore((0, 1), 1.2)

    candidate = run_pipeline('q', eight_sentences, pair, _scorer([0.9, 0.1, 0.6, 0.2, 0.3, 0.4, 0.2, 0.1]),
                             reader, alpha=0.5, n_r=5)

    assert candidate.rationale == {0, 2}
    assert candidate.growth == (frozenset({0, 2}),)
    assert candidate.answer == YES
    assert reader.calls == [[0, 2]]


def test_run_pipeline_grows_to_limit(eight_sentences: Passage) -> None:
    reader = RecordingReader()
    probs = [0.95, 0.1, 0.6, 0.2, 0.3, 0.4, 0.25, 0.15]

    candidate = run_pipeline('q', eight_sentences, ParagraphPairScore((0, 1), 1.0), _scorer(probs), reader,
                             alpha=0.9, n_r=5)

    assert [len(r) for r in candidate.growth] == [1, 2, 3, 4, 5]
    assert candidate.rationale == {0, 2, 5, 4, 6}
    assert candidate.answer.label == AnswerLabel.CNA
    assert len(reader.calls) == 5


def test_run_pipeline_growth_order() -> None:
    passage = Passage.from_paragraphs([('A', ['One.', 'Two.']), ('B', ['Three.'])])

    candidate = run_pipeline('q', passage, ParagraphPairScore((0, 1), 1.0), _scorer([0.9, 0.8, 0.7]),
                             RecordingReader(), alpha=0.85, n_r=5)

    assert candidate.growth == (frozenset({0}), frozenset({0, 1}), frozenset({0, 1, 2}))


def test_run_pipeline_stops_when_answered(eight_sentences: Passage) -> None:
    candidate = run_pipeline('q', eight_sentences, ParagraphPairScore((0, 1), 1.0), _scorer([0.5] * 8),
                             RecordingReader(answer_at=3), alpha=0.6, n_r=5)

    # Equal probabilities grow in id order
    assert candidate.growth == (frozenset(), frozenset({0}), frozenset({0, 1}), frozenset({0, 1, 2}))
    assert candidate.answer == YES


def test_run_pipeline_growth_is_strict(eight_sentences: Passage) -> None:
    rng = random.Random(9)
    for _ in range(200):
        probs = rng.sample([i / 10 + 0.05 for i in range(9)], 8)
        answer_at = rng.choice([None, 1, 2, 3, 4, 6])
        n_r = rng.randint(1, 7)

        candidate = run_pipeline('q', eight_sentences, ParagraphPairScore((0, 1), 1.0), _scorer(probs),
                                 RecordingReader(answer_at), alpha=rng.random() * 0.9, n_r=n_r)

        for before, after in zip(candidate.growth, candidate.growth[1:], strict=False):
            assert before < after
            assert len(after) == len(before) + 1
        assert len(candidate.growth[-1]) <= max(n_r, len(candidate.growth[0]))
        assert candidate.rationale == candidate.growth[-1]


def test_rerank_single_candidate() -> None:
    answer, rationale = rerank_and_answer([_candidate(0.0, YES, {3})], beta=0.5)

    assert answer == YES
    assert rationale == {3}


def test_rerank_prefers_lower_cna_probability() -> None:
    low = AnswerPrediction(AnswerLabel.NO, None, 0.1)
    high = AnswerPrediction(AnswerLabel.YES, None, 0.6)

    answer, rationale = rerank_and_answer([_candidate(1.0, low, {1}), _candidate(1.0, high, {2})], beta=0.9)

    assert answer == low
    assert rationale == {1}


def test_rerank_beta_gate() -> None:
    span = AnswerPrediction(AnswerLabel.SPAN, 'Stephen King', 0.7, (0.0, 0.0, 2.0, 1.5), 'Stephen King')

    answer, _ = rerank_and_answer([_candidate(1.0, span, {0})], beta=0.5)
    assert answer.label == AnswerLabel.CNA
    assert answer.answer_string() == CNA_ANSWER

    answer, _ = rerank_and_answer([_candidate(1.0, span, {0})], beta=0.8)
    assert answer == span


def test_rerank_below_beta_drops_cna_label() -> None:
    cna = AnswerPrediction(AnswerLabel.CNA, None, 0.4, (0.1, 0.0, 0.3, 0.4), 'Carrie')

    answer, _ = rerank_and_answer([_candidate(1.0, cna, {0})], beta=0.5)

    assert answer.label == AnswerLabel.SPAN
    assert answer.span_text == 'Carrie'


def test_rerank_distractor_setting_never_answers_cna() -> None:
    cna = AnswerPrediction(AnswerLabel.CNA, None, 0.95, (0.1, 0.3, 0.0, 2.0))

    answer, _ = rerank_and_answer([_candidate(1.0, cna, {0})], beta=0.5, cna_aware=False)

    assert answer.label == AnswerLabel.NO


def test_rerank_empty_span_ranks_last() -> None:
    empty = AnswerPrediction(AnswerLabel.SPAN, ' ', 0.0)
    no = AnswerPrediction(AnswerLabel.NO, None, 0.3)

    answer, _ = rerank_and_answer([_candidate(2.0, empty, {0}), _candidate(0.0, no, {1})], beta=0.5)

    assert answer == no


def test_rerank_without_candidates() -> None:
    with raises(InferenceError):
        rerank_and_answer([], beta=0.5)


def test_rerank_score_decreases_with_cna_probability() -> None:
    probabilities = [0.0, 0.1, 0.35, 0.5, 0.77, 0.99, 1.0]

    scores = [_candidate(1.3, AnswerPrediction(AnswerLabel.YES, None, p), {0}).rerank_score for p in probabilities]

    assert all(higher > lower for higher, lower in zip(scores, scores[1:], strict=False))


def test_raising_beta_never_adds_cna() -> None:
    rng = random.Random(4)
    labels = [AnswerLabel.YES, AnswerLabel.NO, AnswerLabel.CNA]
    betas = [i / 10 for i in range(10)]
    for _ in range(200):
        candidates = [_candidate(2 * rng.random(), AnswerPrediction(rng.choice(labels), None, rng.random()), {i})
                      for i in range(3)]

        outcomes = [rerank_and_answer(candidates, beta) for beta in betas]

        is_cna = [answer.label == AnswerLabel.CNA for answer, _ in outcomes]
        assert is_cna == sorted(is_cna, reverse=True)
        assert len({rationale for _, rationale in outcomes}) == 1


def test_ranker_scores_paragraphs(trained_store_dir: Path, small_passage: Passage) -> None:
    store = CheckpointStore(trained_store_dir)
    ranker, _ = store.load_model('ranker')
    passage = Passage.from_paragraphs([*((p.title, [s.text for s in p.sentences]) for p in small_passage.paragraphs),
                                       ('Empty', ['  '])])

    scores = ranker.score_paragraphs('Where was Bob born?', passage, Packer(store.load_tokenizer()))

    assert isinstance(ranker, ParagraphRanker)
    assert len(scores) == 4
    assert all(0.0 < s < 1.0 for s in scores)
    assert scores[3] == min(scores)


def test_pipeline_predict(trained_store_dir: Path, synthetic_examples: list[Example]) -> None:
    pipeline = Pipeline.from_store(CheckpointStore(trained_store_dir))

    for example in synthetic_examples[:4]:
        prediction = pipeline.predict(example, alpha=0.3, beta=0.5)

        assert len(prediction.candidates) == pipeline.config.k
        assert prediction.rationale <= {s.id for s in example.passage.sentences}
        assert prediction.answer.label in set(AnswerLabel)
        for candidate in prediction.candidates:
            assert candidate.rationale == candidate.growth[-1]
            assert len(candidate.growth[-1]) <= max(pipeline.config.n_r, len(candidate.growth[0]))


def test_pipeline_predict_is_deterministic(trained_store_dir: Path, synthetic_examples: list[Example]) -> None:
    store = CheckpointStore(trained_store_dir)
    pipeline = Pipeline.from_store(store)

    for example in synthetic_examples[:3]:
        first = pipeline.predict(example, alpha=0.3, beta=0.5)

        assert pipeline.predict(example, alpha=0.3, beta=0.5) == first
        assert Pipeline.from_store(store).predict(example, alpha=0.3, beta=0.5) == first


def test_pipeline_distractor_setting(trained_store_dir: Path, synthetic_examples: list[Example]) -> None:
    store = CheckpointStore(trained_store_dir)
    _, checkpoint = store.load_model('answerer')
    pipeline = Pipeline.from_store(store, replace(checkpoint.training_config, cna_aware=False))

    predictions = pipeline.predict_all(synthetic_examples, alpha=0.5, beta=0.0)

    assert set(predictions) == {e.id for e in synthetic_examples}
    assert all(p.answer.label != AnswerLabel.CNA for p in predictions.values())


def test_pipeline_needs_two_paragraphs(trained_store_dir: Path, synthetic_examples: list[Example]) -> None:
    example = synthetic_examples[0].restrict_to_paragraphs([0])

    with raises(InferenceError):
        Pipeline.from_store(CheckpointStore(trained_store_dir)).predict(example)


def test_write_predictions(tmp_path: Path, synthetic_examples: list[Example]) -> None:
    example = synthetic_examples[0]
    first, third = example.passage.sentence(0), example.passage.sentence(2)
    predictions = {example.id: Prediction(AnswerPrediction(AnswerLabel.CNA, None, 0.8), frozenset({2, 0}))}
    path = tmp_path / 'pred.json'

    write_predictions(path, [example], predictions)

    assert json.loads(path.read_text()) == prediction_record([example], predictions)
    assert prediction_record([example], predictions) == {
        'answer': {example.id: CNA_ANSWER},
        'sp': {example.id: [[first.paragraph_title, first.position], [third.paragraph_title, third.position]]},
    }
