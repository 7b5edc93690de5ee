"""CLI command implementations for IRC (Interpretable Reading Comprehension)."""

import json
import sys
import time
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

import numpy as np
from rich.console import Console
from rich.table import Table

from libirc import __version__
from libirc.checkpoint import CheckpointStore, load_checkpoint
from libirc.config import EncoderConfig, TrainingConfig, config_to_dict, load_config
from libirc.corpus import Example, load_dataset, write_examples
from libirc.dataset_builder import TfidfIndex, attach_retrievals, augment_with_cna, build_fullwiki_cna
from libirc.evaluator import MetricReport, evaluate_predictions, read_predictions
from libirc.exceptions import IRCError
from libirc.inference import Pipeline, Prediction, rerank_and_answer, write_predictions
from libirc.synthetic_corpus import SyntheticSpec, generate
from libirc.tokenizer import Tokenizer
from libirc.trainer import pretrain_answerer, pretrain_extractor, pretrain_ranker
from libirc.trainer import train_e2e as run_train_e2e

PRETRAIN_MODULES = ('extractor', 'answerer', 'ranker')


@dataclass
class RunManifest:
    """What a command ran with, written next to its outputs."""

    command: str
    config: dict[str, Any] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    started_at: str = field(default_factory=lambda: datetime.now(UTC).isoformat())
    wall_clock_seconds: float = 0.0

    def write(self, path: Path, started: float) -> None:
        self.wall_clock_seconds = round(time.monotonic() - started, 3)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True), encoding='utf-8')


def _print_error(message: str) -> None:
    print(f'❌ Error: {message}', file=sys.stderr)


def _print_success(message: str) -> None:
    print(message)


def _manifest_path(output: str | Path) -> Path:
    return Path(f'{output}.manifest.json')


def _store_manifest_path(store: CheckpointStore, command: str) -> Path:
    return store.root / f'{command}.manifest.json'


def _overrides(kwargs: Mapping[str, Any]) -> dict[str, Any]:
    """Config values given on the command line. Unset options and unset switches are dropped."""
    names = {f.name for f in fields(TrainingConfig)} | {f.name for f in fields(EncoderConfig)}
    return {key: value for key, value in kwargs.items() if key in names and value is not None and value is not False}


def _resolve_config(kwargs: Mapping[str, Any], base_training: TrainingConfig | None = None,
                    base_encoder: EncoderConfig | None = None) -> tuple[TrainingConfig, EncoderConfig]:
    return load_config(kwargs.get('config'), _overrides(kwargs), base_training=base_training,
                       base_encoder=base_encoder)


def _all_texts(examples: Iterable[Example]) -> Iterable[str]:
    for example in examples:
        yield example.query
        yield from (s.text for s in example.passage.sentences)


def gen_synthetic(**kwargs) -> int:
    started = time.monotonic()
    output = Path(kwargs['output'])

    try:
        spec = SyntheticSpec(num_examples=kwargs.get('num_examples', 200),
                             entity_vocabulary_size=kwargs.get('entity_vocabulary', 500),
                             paragraphs_per_passage=kwargs.get('paragraphs', 4),
                             sentences_per_paragraph=kwargs.get('sentences', 3),
                             cna_fraction=kwargs.get('cna_fraction', 0.3),
                             yes_no_fraction=kwargs.get('yes_no_fraction', 0.0),
                             seed=kwargs.get('seed', 0))
        count = write_examples(output, generate(spec))
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    spec_record = asdict(spec)
    spec_record['relations'] = list(spec.relations)
    RunManifest('gen-synthetic', config=spec_record, seeds={'seed': spec.seed},
                outputs={'dataset': str(output)}).write(_manifest_path(output), started)
    _print_success(f'Wrote {count} synthetic examples to {output}')
    return 0


def build_dataset(**kwargs) -> int:
    started = time.monotonic()
    output = Path(kwargs['output'])
    seed = kwargs.get('seed', 0)

    try:
        examples = load_dataset(kwargs['input'])
        if kwargs.get('retrieval'):
            examples = attach_retrievals(examples, load_dataset(kwargs['retrieval']))
        labelled, stats = build_fullwiki_cna(examples)
        if kwargs.get('augment_cna', False):
            index = TfidfIndex.from_examples(labelled, kwargs.get('ngram_max', 1))
            labelled += augment_with_cna(labelled, index, seed)
        count = write_examples(output, labelled)
        stats_path = Path(f'{output}.stats.json')
        stats_path.write_text(json.dumps(stats.to_dict(), indent=2), encoding='utf-8')
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    inputs = {'input': str(kwargs['input'])}
    if kwargs.get('retrieval'):
        inputs['retrieval'] = str(kwargs['retrieval'])
    RunManifest('build-dataset',
                config={'augment_cna': bool(kwargs.get('augment_cna', False)), 'ngram_max': kwargs.get('ngram_max', 1)},
                seeds={'seed': seed}, inputs=inputs,
                outputs={'dataset': str(output), 'stats': str(stats_path)}).write(_manifest_path(output), started)

    _print_success(f'Wrote {count} examples to {output}')
    for absent_class, n in stats.counts.items():
        _print_success(f'  absent SFs {absent_class}: {n}')
    return 0


def pretrain(**kwargs) -> int:
    started = time.monotonic()
    store = CheckpointStore(kwargs['store'])
    module = kwargs.get('module', 'all')
    modules = PRETRAIN_MODULES if module == 'all' else (module,)

    try:
        training, encoder = _resolve_config(kwargs)
        examples = load_dataset(kwargs['train'])
        store.init()
        if store.vocab_path().is_file():
            tokenizer = store.load_tokenizer()
        else:
            tokenizer = Tokenizer.build(_all_texts(examples))
            store.save_tokenizer(tokenizer)
        encoder = replace(encoder, vocabulary_size=tokenizer.vocabulary_size)
        index = TfidfIndex.from_examples(examples, training.ngram_max)

        for name in modules:
            match name:
                case 'extractor':
                    result = pretrain_extractor(examples, tokenizer, training, encoder)
                case 'answerer':
                    result = pretrain_answerer(examples, tokenizer, training, encoder, index=index)
                case _:
                    result = pretrain_ranker(examples, tokenizer, training, encoder, index=index)
            path = store.save_model(name, result.model, encoder, training, tokenizer,
                                    {'epoch_losses': result.epoch_losses})
            _print_success(f'Pretrained {name}: {path}')
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    RunManifest('pretrain', config={**config_to_dict(training), **config_to_dict(encoder), 'module': module},
                seeds={'seed': training.seed}, inputs={'train': str(kwargs['train'])},
                outputs={name: str(store.model_path(name)) for name in modules}).write(
        _store_manifest_path(store, 'pretrain'), started)
    return 0


def train_e2e(**kwargs) -> int:
    started = time.monotonic()
    store = CheckpointStore(kwargs['store'])

    try:
        tokenizer = store.load_tokenizer()
        extractor, extractor_checkpoint = store.load_model('extractor')
        answerer, answerer_checkpoint = store.load_model('answerer')
        training, _ = _resolve_config(kwargs, base_training=extractor_checkpoint.training_config)
        examples = load_dataset(kwargs['train'])

        result = run_train_e2e(examples, extractor, answerer, tokenizer, training,
                               state_path=store.trainer_state_path(), resume=kwargs.get('resume', False))
        store.save_model('extractor', result.extractor, extractor_checkpoint.encoder_config, training, tokenizer,
                         {'epoch_losses': result.epoch_losses})
        store.save_model('answerer', result.answerer, answerer_checkpoint.encoder_config, training, tokenizer,
                         {'epoch_losses': result.epoch_losses})
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    RunManifest('train-e2e', config=config_to_dict(training), seeds={'seed': training.seed},
                inputs={'train': str(kwargs['train'])},
                outputs={'extractor': str(store.model_path('extractor')),
                         'answerer': str(store.model_path('answerer')),
                         'trainer_state': str(store.trainer_state_path())}).write(
        _store_manifest_path(store, 'train-e2e'), started)
    _print_success(f'End-to-end training finished after {training.e2e_epochs} epochs')
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        _print_success(f'  epoch {epoch}: loss {loss:.4f}')
    return 0


def _load_pipeline(store: CheckpointStore, kwargs: Mapping[str, Any]) -> Pipeline:
    base = load_checkpoint(store.model_path('answerer')).training_config
    training, _ = _resolve_config(kwargs, base_training=base)
    if kwargs.get('distractor', False):
        training = replace(training, cna_aware=False)
    return Pipeline.from_store(store, training)


def infer(**kwargs) -> int:
    started = time.monotonic()
    store = CheckpointStore(kwargs['store'])
    output = Path(kwargs['output'])

    try:
        pipeline = _load_pipeline(store, kwargs)
        examples = load_dataset(kwargs['data'])
        predictions = pipeline.predict_all(examples)
        write_predictions(output, examples, predictions)
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    RunManifest('infer', config=config_to_dict(pipeline.config), seeds={'seed': pipeline.config.seed},
                inputs={'data': str(kwargs['data']), 'store': str(store.root)},
                outputs={'predictions': str(output)}).write(_manifest_path(output), started)
    _print_success(f'Wrote predictions for {len(predictions)} examples to {output}')
    return 0


def _report_tables(report: MetricReport) -> list[Table]:
    scores = Table(title='Scores (%)')
    for column in ('Ans EM', 'Ans F1', 'Sup EM', 'Sup P', 'Sup R', 'Sup F1', 'CNA Acc', 'CNA P', 'CNA R', 'CNA F1'):
        scores.add_column(column, justify='right')
    values = (report.answer_em, report.answer_f1, report.sf_em, report.sf_precision, report.sf_recall, report.sf_f1,
              report.cna.accuracy, report.cna.precision, report.cna.recall, report.cna.f1)
    scores.add_row(*(f'{v:.1f}' for v in values))

    strata = Table(title='CNA prediction ratio')
    for column in ('Group', 'Class', 'Examples', 'CNA ratio (%)'):
        strata.add_column(column)
    for group, stats in (('absent SFs', report.strata.by_absent_class), ('all SFs present', report.strata.sufficiency)):
        for key, stat in stats.items():
            strata.add_row(group, key, str(stat.count), f'{stat.ratio:.1f}')
    return [scores, strata]


def evaluate(**kwargs) -> int:
    started = time.monotonic()

    try:
        gold = load_dataset(kwargs['gold'])
        report = evaluate_predictions(gold, read_predictions(kwargs['pred'], gold))
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    report_json = json.dumps(report.to_dict(), indent=2)
    outputs = {}
    if kwargs.get('output'):
        Path(kwargs['output']).write_text(report_json, encoding='utf-8')
        outputs['report'] = str(kwargs['output'])
    RunManifest('evaluate', inputs={'pred': str(kwargs['pred']), 'gold': str(kwargs['gold'])},
                outputs=outputs).write(_manifest_path(kwargs.get('output') or f'{kwargs["pred"]}.evaluate'), started)

    if kwargs.get('table', False):
        console = Console()
        for table in _report_tables(report):
            console.print(table)
    else:
        _print_success(report_json)
    return 0


def parse_range(text: str) -> list[float]:
    """Parse start:stop:step into the grid from start to stop inclusive.

    :raises ValueError: If the text is not three numbers or step is not positive."""
    start, stop, step = (float(part) for part in text.split(':'))
    if step <= 0:
        msg = f'Sweep step must be positive, got {step}'
        raise ValueError(msg)
    return [round(float(v), 10) for v in np.arange(start, stop + step / 2, step)]


def _sweep_reports(pipeline: Pipeline, examples: Sequence[Example], param: str,
                   values: Sequence[float]) -> list[MetricReport]:
    """One report per value. Candidates do not depend on beta, so a beta sweep predicts once."""
    if param == 'alpha':
        reports = []
        for alpha in values:
            predictions = pipeline.predict_all(examples, alpha=alpha)
            reports.append(evaluate_predictions(examples, {i: (p.answer, p.rationale) for i, p in predictions.items()}))
        return reports

    predictions = pipeline.predict_all(examples)
    reports = []
    for beta in values:
        answered: dict[str, Any] = {}
        for example_id, prediction in predictions.items():
            answered[example_id] = _rerank(prediction, beta, cna_aware=pipeline.config.cna_aware)
        reports.append(evaluate_predictions(examples, answered))
    return reports


def _rerank(prediction: Prediction, beta: float, *, cna_aware: bool) -> tuple[Any, frozenset[int]]:
    if not prediction.candidates:
        return prediction.answer, prediction.rationale
    return rerank_and_answer(prediction.candidates, beta, cna_aware=cna_aware)


def sweep(**kwargs) -> int:
    started = time.monotonic()
    store = CheckpointStore(kwargs['store'])
    param = kwargs['param']

    try:
        values = parse_range(kwargs.get('range') or '0:0.9:0.1')
    except ValueError as e:
        _print_error(f'Invalid range {kwargs.get("range")!r}: {e}')
        return 1

    try:
        pipeline = _load_pipeline(store, kwargs)
        examples = load_dataset(kwargs['dev'])
        reports = _sweep_reports(pipeline, examples, param, values)
    except (IRCError, OSError) as e:
        _print_error(str(e))
        return 1

    scores = [r.answer_f1 for r in reports]
    best = int(np.argmax(scores))

    table = Table(title=f'{param} sweep')
    table.add_column(param, justify='right')
    table.add_column('Ans F1', justify='right')
    table.add_column('Sup F1', justify='right')
    table.add_column('CNA F1', justify='right')
    for value, report in zip(values, reports, strict=True):
        table.add_row(f'{value:.2f}', f'{report.answer_f1:.1f}', f'{report.sf_f1:.1f}', f'{report.cna.f1:.1f}')
    Console().print(table)

    results = {'param': param, 'values': values, 'scores': scores, 'best': values[best],
               'reports': [r.to_dict() for r in reports]}
    outputs = {}
    if kwargs.get('output'):
        Path(kwargs['output']).write_text(json.dumps(results, indent=2), encoding='utf-8')
        outputs['results'] = str(kwargs['output'])
    manifest_path = _manifest_path(kwargs['output']) if kwargs.get('output') else _store_manifest_path(store, 'sweep')
    RunManifest('sweep', config={**config_to_dict(pipeline.config), 'param': param, 'range': kwargs.get('range')},
                seeds={'seed': pipeline.config.seed}, inputs={'dev': str(kwargs['dev']), 'store': str(store.root)},
                outputs=outputs).write(manifest_path, started)

    _print_success(f'Best {param}: {values[best]:.2f} (F1 {scores[best]:.1f}) over {len(values)} evaluations')
    return 0
