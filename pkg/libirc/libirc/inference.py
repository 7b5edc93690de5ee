"""Paragraph-pair ranking, iterative rationale growth and the CNA-aware final answer."""

import json
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path

import torch

from .answer_module import AnswerModel, AnswerPrediction, decode_answer
from .checkpoint import CheckpointStore
from .config import TrainingConfig
from .constants import AnswerLabel
from .corpus import Example, Passage, Rationale, Sentence
from .encoder import Packer
from .exceptions import InferenceError
from .extraction_module import ExtractionModel, SentenceScores, threshold_extract
from .ranker import ParagraphRanker
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)

SentenceScorer = Callable[[str, Sequence[Sentence]], SentenceScores]
AnswerReader = Callable[[str, Sequence[Sentence]], AnswerPrediction]


@dataclass(frozen=True)
class ParagraphPairScore:
    pair: tuple[int, int]
    score: float


@dataclass(frozen=True)
class PredictionCandidate:
    """The outcome of the pipeline on one paragraph pair.

    growth holds the rationale passed to the answer module at each call, in order."""

    pair: tuple[int, int]
    pair_score: float
    answer: AnswerPrediction
    rationale: Rationale
    growth: tuple[Rationale, ...]

    @property
    def rerank_score(self) -> float:
        return 0.5 * self.pair_score - self.answer.cna_probability


@dataclass(frozen=True)
class Prediction:
    answer: AnswerPrediction
    rationale: Rationale
    candidates: tuple[PredictionCandidate, ...] = ()


def rank_pairs(paragraph_scores: Sequence[float], k: int) -> list[ParagraphPairScore]:
    """The k unordered paragraph pairs with the highest S_i + S_j.

    Ties keep lexicographic (i, j) order.

    :raises InferenceError: If there are fewer than 2 paragraphs."""
    if len(paragraph_scores) < 2:
        msg = f'Need at least 2 paragraphs to form a pair, got {len(paragraph_scores)}'
        raise InferenceError(msg)
    pairs = [ParagraphPairScore((i, j), paragraph_scores[i] + paragraph_scores[j])
             for i, j in combinations(range(len(paragraph_scores)), 2)]
    return sorted(pairs, key=lambda p: -p.score)[:k]


def rank_paragraphs(query: str, passage: Passage, ranker: ParagraphRanker, packer: Packer,
                    k: int) -> list[ParagraphPairScore]:
    return rank_pairs(ranker.score_paragraphs(query, passage, packer), k)


def run_pipeline(query: str, passage: Passage, pair: ParagraphPairScore, scorer: SentenceScorer,
                 reader: AnswerReader, alpha: float, n_r: int) -> PredictionCandidate:
    """Answer from one paragraph pair, growing the rationale while the answer is CNA.

    The initial rationale holds the sentences with p_i > alpha. While the answer is CNA and the
    rationale has fewer than n_r sentences, the highest-p sentence not yet in it is added
    (ties to the lower id) and the answer module is called again.

    :param query: The query.
    :param passage: The pair's sub-passage.
    :param pair: The pair and its ranker score.
    :param scorer: Scores the sub-passage's sentences.
    :param reader: Answers from a rationale.
    :param alpha: Extraction threshold.
    :param n_r: Rationale size at which growth stops.
    :return: The candidate, with sentence ids of the sub-passage."""
    sentences = passage.sentences
    scores = scorer(query, sentences)
    ranked = [sid for sid, _ in sorted(zip(scores.sentence_ids, scores.prob_list(), strict=True),
                                       key=lambda item: (-item[1], item[0]))]

    rationale = threshold_extract(scores, alpha)
    answer = reader(query, [sentences[i] for i in sorted(rationale)])
    growth = [rationale]
    while answer.label == AnswerLabel.CNA and len(rationale) < n_r:
        addition = next((sid for sid in ranked if sid not in rationale), None)
        if addition is None:
            break
        rationale = rationale | {addition}
        answer = reader(query, [sentences[i] for i in sorted(rationale)])
        growth.append(rationale)

    return PredictionCandidate(pair.pair, pair.score, answer, rationale, tuple(growth))


def rerank_and_answer(candidates: Sequence[PredictionCandidate], beta: float,
                      *, cna_aware: bool = True) -> tuple[AnswerPrediction, Rationale]:
    """Pick the candidate with the highest 1/2 (S_i + S_j) - P(CNA) and finalize its answer.

    Span candidates with an empty span rank below all others. In CNA-aware mode the answer is
    CNA iff its CNA probability exceeds beta; otherwise it is the best non-CNA label.

    :raises InferenceError: If there are no candidates."""
    if not candidates:
        msg = 'No candidate to rerank'
        raise InferenceError(msg)

    def key(candidate: PredictionCandidate) -> tuple[bool, float]:
        answer = candidate.answer
        usable = not (answer.label == AnswerLabel.SPAN and not (answer.span_text or '').strip())
        return usable, candidate.rerank_score

    best = max(candidates, key=key)
    answer = best.answer
    if cna_aware and answer.cna_probability > beta:
        return answer.as_cna(), best.rationale
    return answer.without_cna(), best.rationale


class Pipeline:
    """Trained models wired together for prediction."""

    def __init__(self, tokenizer: Tokenizer, extractor: ExtractionModel, answerer: AnswerModel,
                 ranker: ParagraphRanker, config: TrainingConfig) -> None:
        self.tokenizer = tokenizer
        self.extractor = extractor.eval()
        self.answerer = answerer.eval()
        self.ranker = ranker.eval()
        self.config = config
        self.packer = Packer.from_config(tokenizer, config)

    @classmethod
    def from_store(cls, store: CheckpointStore, config: TrainingConfig | None = None) -> 'Pipeline':
        """Load all three models from a checkpoint store.

        :param store: The store written by training.
        :param config: Overrides the training config saved with the answer module."""
        tokenizer = store.load_tokenizer()
        extractor, _ = store.load_model('extractor')
        answerer, checkpoint = store.load_model('answerer')
        ranker, _ = store.load_model('ranker')
        return cls(tokenizer, extractor, answerer, ranker, config or checkpoint.training_config)

    def score_sentences(self, query: str, sentences: Sequence[Sentence]) -> SentenceScores:
        with torch.no_grad():
            return self.extractor(self.packer.pack_extraction_input(query, sentences))

    def read_answer(self, query: str, sentences: Sequence[Sentence]) -> AnswerPrediction:
        packed = self.packer.pack_answer_input(query, sentences)
        with torch.no_grad():
            return decode_answer(self.answerer(packed), packed, self.config.max_answer_tokens)

    def predict(self, example: Example, *, alpha: float | None = None, beta: float | None = None) -> Prediction:
        """Predict the answer and rationale for one example.

        :param example: The example; its gold fields are not read.
        :param alpha: Overrides config.alpha.
        :param beta: Overrides config.beta.
        :return: The final answer, its rationale as passage sentence ids, and every candidate.
        :raises InferenceError: If the passage has fewer than 2 paragraphs."""
        alpha = self.config.alpha if alpha is None else alpha
        beta = self.config.beta if beta is None else beta

        pairs = rank_paragraphs(example.query, example.passage, self.ranker, self.packer, self.config.k)
        candidates = []
        for pair in pairs:
            sub_passage, id_map = example.passage.select(pair.pair)
            if not sub_passage.sentence_count:
                continue
            original = {new: old for old, new in id_map.items()}
            candidate = run_pipeline(example.query, sub_passage, pair, self.score_sentences, self.read_answer,
                                     alpha, self.config.n_r)
            candidates.append(replace(candidate,
                                      rationale=frozenset(original[i] for i in candidate.rationale),
                                      growth=tuple(frozenset(original[i] for i in r) for r in candidate.growth)))

        if not candidates:
            logger.warning('Example %s has no sentence in its top paragraph pairs', example.id)
            answer = AnswerPrediction(AnswerLabel.CNA, None, 1.0)
            return Prediction(answer if self.config.cna_aware else answer.without_cna(), frozenset())

        answer, rationale = rerank_and_answer(candidates, beta, cna_aware=self.config.cna_aware)
        return Prediction(answer, rationale, tuple(candidates))

    def predict_all(self, examples: Iterable[Example], *, alpha: float | None = None,
                    beta: float | None = None) -> dict[str, Prediction]:
        return {example.id: self.predict(example, alpha=alpha, beta=beta) for example in examples}


def prediction_record(examples: Iterable[Example], predictions: dict[str, Prediction]) -> dict[str, dict]:
    """Predictions in the HotpotQA schema: answer strings and [title, sentence index] pairs."""
    record: dict[str, dict] = {'answer': {}, 'sp': {}}
    for example in examples:
        prediction = predictions[example.id]
        record['answer'][example.id] = prediction.answer.answer_string()
        record['sp'][example.id] = [[example.passage.sentence(i).paragraph_title, example.passage.sentence(i).position]
                                    for i in sorted(prediction.rationale)]
    return record


def write_predictions(path: str | Path, examples: Iterable[Example], predictions: dict[str, Prediction]) -> None:
    Path(path).write_text(json.dumps(prediction_record(examples, predictions), ensure_ascii=False, indent=2),
                          encoding='utf-8')
