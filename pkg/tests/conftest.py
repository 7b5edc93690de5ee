import json
import shutil
from collections.abc import Callable
from pathlib import Path
from typing import Any

from libirc.checkpoint import CheckpointStore
from libirc.config import EncoderConfig, TrainingConfig
from libirc.corpus import Example, Passage, write_examples
from libirc.synthetic_corpus import SyntheticSpec, generate
from libirc.tokenizer import Tokenizer
from libirc.trainer import pretrain_answerer, pretrain_extractor, pretrain_ranker
from pytest import TempPathFactory, fixture

FLASHBACK_RECORD: dict[str, Any] = {
    '_id': 'flashback-1',
    'question': 'Which game was released first, Flashback or Fade to Black?',
    'answer': 'Flashback',
    'supporting_facts': [['Flashback (1992 video game)', 0], ['Fade to Black (video game)', 0]],
    'context': [
        ['Flashback (1992 video game)', [
            'Flashback is a 1992 science fiction cinematic platform game.',
            ' It was developed by Delphine Software.',
        ]],
        ['Fade to Black (video game)', [
            'Fade to Black is a 1995 action-adventure game and the sequel to Flashback.',
            'It was developed by Delphine Software.',
        ]],
        ['Another World (video game)', [
            'Another World is a 1991 cinematic platformer.',
            '   ',
            'It was designed by Eric Chahi.',
        ]],
    ],
}

YES_RECORD: dict[str, Any] = {
    '_id': 'yes-1',
    'question': 'Are Flashback and Fade to Black both games?',
    'answer': 'yes',
    'supporting_facts': [['Flashback (1992 video game)', 0], ['Fade to Black (video game)', 7]],
    'context': FLASHBACK_RECORD['context'],
}


def tiny_encoder(tokenizer: Tokenizer) -> EncoderConfig:
    return EncoderConfig(vocabulary_size=tokenizer.vocabulary_size, embedding_dim=16, layer_count=1, head_count=2,
                         feed_forward_dim=32)


@fixture
def hotpot_file_factory(tmp_path_factory: TempPathFactory) -> Callable[[list[Any]], Path]:
    data_dir = tmp_path_factory.mktemp('hotpot')

    def _factory(records: list[Any], name: str = 'data.json') -> Path:
        path = data_dir / name
        path.write_text(json.dumps(records), encoding='utf-8')
        return path

    return _factory


@fixture
def hotpot_file(hotpot_file_factory: Callable[[list[Any]], Path]) -> Path:
    return hotpot_file_factory([FLASHBACK_RECORD, YES_RECORD])


@fixture
def small_passage() -> Passage:
    return Passage.from_paragraphs([
        ('Alpha', ['Alpha is a city.', 'Its mayor is Bob.']),
        ('Beta', ['Bob was born in Gamma.']),
        ('Delta', ['Delta is a river.', 'It flows north.']),
    ])


@fixture(scope='session')
def synthetic_spec() -> SyntheticSpec:
    return SyntheticSpec(num_examples=12, entity_vocabulary_size=200, paragraphs_per_passage=4,
                         sentences_per_paragraph=3, cna_fraction=0.25, yes_no_fraction=0.25, seed=7)


@fixture(scope='session')
def synthetic_examples(synthetic_spec: SyntheticSpec) -> list[Example]:
    return generate(synthetic_spec)


@fixture(scope='session')
def tokenizer(synthetic_examples: list[Example]) -> Tokenizer:
    texts = [e.query for e in synthetic_examples] + [s.text for e in synthetic_examples for s in e.passage.sentences]
    return Tokenizer.build(texts)


@fixture(scope='session')
def encoder_config(tokenizer: Tokenizer) -> EncoderConfig:
    return tiny_encoder(tokenizer)


@fixture
def flashback_record() -> dict[str, Any]:
    return dict(FLASHBACK_RECORD)


@fixture
def yes_record() -> dict[str, Any]:
    return dict(YES_RECORD)


@fixture(scope='session')
def training_config() -> TrainingConfig:
    return TrainingConfig(batch_size=4, pretrain_epochs=1, e2e_epochs=1, learning_rate=1e-3, seed=0)


@fixture(scope='session')
def trained_store_dir(tmp_path_factory: TempPathFactory, synthetic_examples: list[Example], tokenizer: Tokenizer,
                      encoder_config: EncoderConfig, training_config: TrainingConfig) -> Path:
    """A store holding every model pretrained for one epoch on the synthetic corpus."""
    store = CheckpointStore(tmp_path_factory.mktemp('store') / 'run')
    store.init()
    store.save_tokenizer(tokenizer)
    for kind, train in (('extractor', pretrain_extractor), ('answerer', pretrain_answerer),
                        ('ranker', pretrain_ranker)):
        result = train(synthetic_examples, tokenizer, training_config, encoder_config)
        store.save_model(kind, result.model, encoder_config, training_config, tokenizer)
    return store.root


@fixture
def trained_store(trained_store_dir: Path, tmp_path_factory: TempPathFactory) -> CheckpointStore:
    """A private copy of the pretrained store that a test may modify."""
    target = tmp_path_factory.mktemp('store_copy', numbered=True) / 'run'
    shutil.copytree(trained_store_dir, target)
    return CheckpointStore(target)


@fixture
def dataset_file(tmp_path_factory: TempPathFactory, synthetic_examples: list[Example]) -> Path:
    path = tmp_path_factory.mktemp('datasets', numbered=True) / 'synthetic.jsonl'
    write_examples(path, synthetic_examples)
    return path


@fixture
def config_file(tmp_path_factory: TempPathFactory) -> Path:
    """A flat config file describing a tiny encoder and a one-epoch schedule."""
    path = tmp_path_factory.mktemp('config', numbered=True) / 'config.json'
    path.write_text(json.dumps({'embedding_dim': 16, 'layer_count': 1, 'head_count': 2, 'feed_forward_dim': 32,
                                'batch_size': 4, 'pretrain_epochs': 1, 'e2e_epochs': 1}), encoding='utf-8')
    return path
