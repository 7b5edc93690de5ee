"""Answer, supporting-fact and CNA-detection metrics with stratified reports."""

import json
import logging
import re
import string
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .answer_module import AnswerPrediction
from .constants import ABSENT_SF_CLASSES, CNA_ANSWER, AnswerLabel
from .corpus import Example, Rationale
from .dataset_builder import absent_sf_class
from .exceptions import EvaluationError

logger = logging.getLogger(__name__)

_PUNCTUATION = frozenset(string.punctuation)
_ARTICLES = re.compile(r'\b(a|an|the)\b')

SUFFICIENT = 'sufficient'
INSUFFICIENT = 'insufficient'


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    text = ''.join(ch for ch in text.lower() if ch not in _PUNCTUATION)
    return ' '.join(_ARTICLES.sub(' ', text).split())


def string_em(prediction: str, gold: str) -> float:
    return float(normalize_answer(prediction) == normalize_answer(gold))


def string_f1(prediction: str, gold: str) -> float:
    """Token-overlap F1 of normalized strings; 1 whenever they are equal."""
    normalized_prediction, normalized_gold = normalize_answer(prediction), normalize_answer(gold)
    # Equal normalizations score 1 even when both are empty, where token counting alone gives 0
    if normalized_prediction == normalized_gold:
        return 1.0
    prediction_tokens, gold_tokens = normalized_prediction.split(), normalized_gold.split()
    same = sum((Counter(prediction_tokens) & Counter(gold_tokens)).values())
    if same == 0:
        return 0.0
    precision = same / len(prediction_tokens)
    recall = same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def answer_metrics(pred: AnswerPrediction, gold: Any) -> tuple[float, float]:
    """Answer EM and F1 for one example.

    CNA matches only CNA. A label mismatch scores 0. Yes/No match by label; Span answers
    are compared as normalized strings.

    :param pred: The predicted answer.
    :param gold: An AnswerTarget (anything with label and span_text).
    :return: (em, f1) in [0, 1]."""
    if AnswerLabel.CNA in (pred.label, gold.label):
        both = float(pred.label == gold.label)
        return both, both
    if pred.label != gold.label:
        return 0.0, 0.0
    if pred.label != AnswerLabel.SPAN:
        return 1.0, 1.0
    return string_em(pred.span_text or '', gold.span_text or ''), string_f1(pred.span_text or '', gold.span_text or '')


def sf_metrics(pred: Rationale, gold: Rationale) -> tuple[float, float, float, float]:
    """Supporting-fact (em, precision, recall, f1) over sentence id sets.

    Empty gold with empty prediction scores 1 everywhere; empty gold with a non-empty
    prediction scores 0 everywhere."""
    pred, gold = set(pred), set(gold)
    if not gold:
        value = float(not pred)
        return value, value, value, value

    true_positives = len(pred & gold)
    precision = true_positives / len(pred) if pred else 0.0
    recall = true_positives / len(gold)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return float(pred == gold), precision, recall, f1


@dataclass(frozen=True)
class CnaDetection:
    accuracy: float
    precision: float
    recall: float
    f1: float


def cna_detection_metrics(preds: Sequence[AnswerLabel], golds: Sequence[AnswerLabel]) -> CnaDetection:
    """Binary classification metrics with CNA as the positive class, as fractions.

    Undefined ratios (no predicted or no gold positives) are 0.

    :raises EvaluationError: If the lists differ in length."""
    if len(preds) != len(golds):
        msg = f'Got {len(preds)} predictions for {len(golds)} gold answers'
        raise EvaluationError(msg)
    if not preds:
        return CnaDetection(0.0, 0.0, 0.0, 0.0)

    pairs = [(p == AnswerLabel.CNA, g == AnswerLabel.CNA) for p, g in zip(preds, golds, strict=True)]
    true_positives = sum(1 for p, g in pairs if p and g)
    predicted = sum(1 for p, _ in pairs if p)
    actual = sum(1 for _, g in pairs if g)

    accuracy = sum(1 for p, g in pairs if p == g) / len(pairs)
    precision = true_positives / predicted if predicted else 0.0
    recall = true_positives / actual if actual else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return CnaDetection(accuracy, precision, recall, f1)


@dataclass(frozen=True)
class StratumStat:
    count: int
    cna_count: int

    @property
    def ratio(self) -> float:
        """CNA-prediction ratio as a percentage."""
        return 100.0 * self.cna_count / self.count


@dataclass(frozen=True)
class Strata:
    """CNA-prediction ratios per absent-SF class and, within class 0, per SF sufficiency.

    Only nonempty strata are present."""

    by_absent_class: dict[str, StratumStat] = field(default_factory=dict)
    sufficiency: dict[str, StratumStat] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {group: {key: {'count': s.count, 'cna_count': s.cna_count, 'ratio': s.ratio}
                        for key, s in getattr(self, group).items()}
                for group in ('by_absent_class', 'sufficiency')}


def stratify(examples: Sequence[Example], predictions: Mapping[str, tuple[AnswerPrediction, Rationale]]) -> Strata:
    """Group examples by absent-SF class and, for class 0, by whether the predicted SFs cover the gold SFs.

    :param examples: Gold examples.
    :param predictions: Answer and rationale (passage sentence ids) per example id."""
    by_class: dict[str, list[bool]] = {}
    by_sufficiency: dict[str, list[bool]] = {}
    for example in examples:
        answer, rationale = _prediction_for(example, predictions)
        is_cna = answer.label == AnswerLabel.CNA
        absent_class = absent_sf_class(example.absent_sf_count)
        by_class.setdefault(absent_class, []).append(is_cna)
        if absent_class == ABSENT_SF_CLASSES[0]:
            key = SUFFICIENT if example.gold_rationale <= rationale else INSUFFICIENT
            by_sufficiency.setdefault(key, []).append(is_cna)

    def stats(groups: dict[str, list[bool]], order: Sequence[str]) -> dict[str, StratumStat]:
        return {key: StratumStat(len(groups[key]), sum(groups[key])) for key in order if groups.get(key)}

    return Strata(stats(by_class, ABSENT_SF_CLASSES), stats(by_sufficiency, (SUFFICIENT, INSUFFICIENT)))


@dataclass(frozen=True)
class MetricReport:
    """Averaged metrics as percentages in [0, 100]."""

    count: int
    answer_em: float
    answer_f1: float
    sf_em: float
    sf_precision: float
    sf_recall: float
    sf_f1: float
    cna: CnaDetection
    strata: Strata

    def to_dict(self) -> dict[str, Any]:
        report = asdict(self)
        report['strata'] = self.strata.to_dict()
        return report


def evaluate_predictions(examples: Sequence[Example],
                         predictions: Mapping[str, tuple[AnswerPrediction, Rationale]]) -> MetricReport:
    """Score predictions against gold examples.

    :raises EvaluationError: If an example has no prediction."""
    if not examples:
        msg = 'Nothing to evaluate'
        raise EvaluationError(msg)

    answer_scores, sf_scores = [], []
    pred_labels, gold_labels = [], []
    for example in examples:
        answer, rationale = _prediction_for(example, predictions)
        answer_scores.append(answer_metrics(answer, example.gold_answer))
        sf_scores.append(sf_metrics(rationale, example.gold_rationale))
        pred_labels.append(answer.label)
        gold_labels.append(example.gold_answer.label)

    def mean(values: list[tuple[float, ...]], column: int) -> float:
        return 100.0 * sum(v[column] for v in values) / len(values)

    cna = cna_detection_metrics(pred_labels, gold_labels)
    return MetricReport(count=len(examples),
                        answer_em=mean(answer_scores, 0),
                        answer_f1=mean(answer_scores, 1),
                        sf_em=mean(sf_scores, 0),
                        sf_precision=mean(sf_scores, 1),
                        sf_recall=mean(sf_scores, 2),
                        sf_f1=mean(sf_scores, 3),
                        cna=CnaDetection(*(100.0 * v for v in (cna.accuracy, cna.precision, cna.recall, cna.f1))),
                        strata=stratify(examples, predictions))


def _prediction_for(example: Example, predictions: Mapping[str, tuple[AnswerPrediction, Rationale]],
                    ) -> tuple[AnswerPrediction, Rationale]:
    try:
        return predictions[example.id]
    except KeyError:
        msg = f'No prediction for example {example.id}'
        raise EvaluationError(msg) from None


def prediction_from_string(answer: str) -> AnswerPrediction:
    """Parse a HotpotQA-schema answer string back into a prediction."""
    match answer.strip().lower():
        case 'yes':
            return AnswerPrediction(AnswerLabel.YES, None, 0.0)
        case 'no':
            return AnswerPrediction(AnswerLabel.NO, None, 0.0)
        case label if label == CNA_ANSWER:
            return AnswerPrediction(AnswerLabel.CNA, None, 1.0)
        case _:
            return AnswerPrediction(AnswerLabel.SPAN, answer, 0.0)


def read_predictions(path: str | Path, examples: Sequence[Example]) -> dict[str, tuple[AnswerPrediction, Rationale]]:
    """Read a HotpotQA-schema prediction file, resolving [title, index] pairs against the gold passages.

    Pairs that name no sentence of the passage count as wrong predictions.

    :raises EvaluationError: If the file cannot be read or lacks the answer/sp objects."""
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
        answers, supporting = data['answer'], data.get('sp', {})
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        msg = f'Cannot read predictions from {path}: {e}'
        raise EvaluationError(msg) from e

    predictions: dict[str, tuple[AnswerPrediction, Rationale]] = {}
    for example in examples:
        if example.id not in answers:
            continue
        ids: set[int] = set()
        for n, (title, position) in enumerate(supporting.get(example.id, [])):
            sentence = example.passage.find(title, int(position))
            ids.add(sentence.id if sentence is not None else -1 - n)
        predictions[example.id] = (prediction_from_string(answers[example.id]), frozenset(ids))
    return predictions
