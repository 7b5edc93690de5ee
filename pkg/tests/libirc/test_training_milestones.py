"""Convergence checks that train every module on synthetic corpora. Run with `pytest -m slow`."""

from copy import deepcopy
from dataclasses import dataclass, replace

from libirc.answer_module import AnswerPrediction
from libirc.config import EncoderConfig, TrainingConfig
from libirc.constants import AnswerLabel
from libirc.corpus import Example
from libirc.dataset_builder import TfidfIndex, augment_with_cna
from libirc.evaluator import MetricReport, answer_metrics, evaluate_predictions
from libirc.inference import Pipeline
from libirc.synthetic_corpus import SyntheticSpec, generate
from libirc.tokenizer import Tokenizer
from libirc.trainer import pretrain_answerer, pretrain_extractor, pretrain_ranker, train_e2e, training_view
from pytest import fixture, mark

pytestmark = mark.slow

TRAIN_SPEC = SyntheticSpec(num_examples=200, cna_fraction=0.3, seed=11)


@dataclass
class MilestoneRun:
    index: TfidfIndex
    config: TrainingConfig
    pretrained: Pipeline
    trained: Pipeline


def _encoder_config(tokenizer: Tokenizer) -> EncoderConfig:
    return EncoderConfig(vocabulary_size=tokenizer.vocabulary_size, embedding_dim=64, layer_count=2, head_count=4,
                         feed_forward_dim=128)


def _train(examples: list[Example], seed: int) -> MilestoneRun:
    tokenizer = Tokenizer.build([e.query for e in examples] + [s.text for e in examples for s in e.passage.sentences])
    encoder_config = _encoder_config(tokenizer)
    config = TrainingConfig(batch_size=8, pretrain_epochs=40, e2e_epochs=5, learning_rate=1e-3, seed=seed)
    index = TfidfIndex.from_examples(examples)

    extractor = pretrain_extractor(examples, tokenizer, config, encoder_config).model
    answerer = pretrain_answerer(examples, tokenizer, config, encoder_config, index=index).model
    ranker = pretrain_ranker(examples, tokenizer, config, encoder_config, index=index).model
    pretrained = Pipeline(tokenizer, deepcopy(extractor), deepcopy(answerer), ranker, config)

    result = train_e2e(examples, extractor, answerer, tokenizer, replace(config, learning_rate=3e-4), index=index)
    trained = Pipeline(tokenizer, result.extractor, result.answerer, ranker, config)
    return MilestoneRun(index, config, pretrained, trained)


def _evaluate(pipeline: Pipeline, examples: list[Example]) -> MetricReport:
    predictions = pipeline.predict_all(examples)
    return evaluate_predictions(examples, {i: (p.answer, p.rationale) for i, p in predictions.items()})


@fixture(scope='module')
def train_examples() -> list[Example]:
    return generate(TRAIN_SPEC)


@fixture(scope='module')
def held_out_examples() -> list[Example]:
    # Same entity names as the training corpus, unseen example numbers
    return generate(replace(TRAIN_SPEC, num_examples=300))[200:]


@fixture(scope='module')
def milestone(train_examples: list[Example]) -> MilestoneRun:
    return _train(train_examples, seed=0)


def test_pretrain_extractor_loss_falls_tenfold() -> None:
    examples = generate(SyntheticSpec(num_examples=50, seed=5))
    tokenizer = Tokenizer.build([e.query for e in examples] + [s.text for e in examples for s in e.passage.sentences])
    config = TrainingConfig(batch_size=8, pretrain_epochs=30, learning_rate=1e-3)

    losses = pretrain_extractor(examples, tokenizer, config, _encoder_config(tokenizer)).epoch_losses

    assert losses[-1] < 0.1 * losses[0]


def test_pretrained_answerer_reads_gold_rationales(milestone: MilestoneRun, train_examples: list[Example]) -> None:
    reader = milestone.pretrained
    views = [training_view(e) for e in train_examples]
    augmented = augment_with_cna(train_examples, milestone.index, milestone.config.seed)

    def read(example: Example) -> AnswerPrediction:
        sentences = [example.passage.sentence(i) for i in sorted(example.gold_rationale)]
        return reader.read_answer(example.query, sentences)

    exact = [answer_metrics(read(v), v.gold_answer)[0] for v in views]
    cna_views = [v for v in [*views, *augmented] if v.gold_answer.label == AnswerLabel.CNA]
    cna_hits = [read(v).label == AnswerLabel.CNA for v in cna_views]

    assert augmented
    assert sum(exact) / len(exact) >= 0.95
    assert sum(cna_hits) / len(cna_hits) >= 0.95


def test_overfit_milestone(milestone: MilestoneRun, train_examples: list[Example]) -> None:
    report = _evaluate(milestone.trained, train_examples)

    assert report.answer_em >= 95.0
    assert report.sf_recall >= 95.0
    assert report.cna.f1 >= 90.0


def test_shortcut_resistance(milestone: MilestoneRun, held_out_examples: list[Example]) -> None:
    strata = _evaluate(milestone.trained, held_out_examples).strata.by_absent_class

    assert strata['1'].ratio >= 80.0
    assert strata['0'].ratio <= 30.0


def test_e2e_training_does_not_lower_answer_f1(milestone: MilestoneRun, train_examples: list[Example],
                                               held_out_examples: list[Example]) -> None:
    runs = [milestone, _train(train_examples, seed=1), _train(train_examples, seed=2)]

    deltas = [_evaluate(run.trained, held_out_examples).answer_f1
              - _evaluate(run.pretrained, held_out_examples).answer_f1 for run in runs]

    assert sum(deltas) >= 0.0
