import json
from pathlib import Path

from libirc.constants import AnswerLabel
from libirc.corpus import read_examples
from pytest import CaptureFixture

from irc import cli_commands


def test_gen_synthetic_command(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    output = tmp_path / 'synthetic.jsonl'

    assert cli_commands.gen_synthetic(output=str(output), num_examples=20, entity_vocabulary=100, paragraphs=3,
                                      sentences=2, cna_fraction=0.5, yes_no_fraction=0.0, seed=9) == 0

    examples = read_examples(output)
    assert len(examples) == 20
    assert sum(e.gold_answer.label == AnswerLabel.CNA for e in examples) == 10
    assert all(e.passage.paragraph_count == 3 for e in examples)
    assert 'Wrote 20 synthetic examples' in capsys.readouterr().out

    manifest = json.loads(Path(f'{output}.manifest.json').read_text())
    assert manifest['command'] == 'gen-synthetic'
    assert manifest['seeds'] == {'seed': 9}
    assert manifest['config']['cna_fraction'] == 0.5
    assert manifest['outputs'] == {'dataset': str(output)}


def test_gen_synthetic_is_reproducible(tmp_path: Path) -> None:
    first, second = tmp_path / 'a.jsonl', tmp_path / 'b.jsonl'

    assert cli_commands.gen_synthetic(output=str(first), num_examples=8, seed=2) == 0
    assert cli_commands.gen_synthetic(output=str(second), num_examples=8, seed=2) == 0

    assert first.read_text() == second.read_text()


def test_gen_synthetic_invalid_spec(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.gen_synthetic(output=str(tmp_path / 'x.jsonl'), cna_fraction=2.0) == 1

    assert 'cna_fraction' in capsys.readouterr().err
    assert not (tmp_path / 'x.jsonl').exists()


def test_gen_synthetic_small_vocabulary(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.gen_synthetic(output=str(tmp_path / 'x.jsonl'), entity_vocabulary=5) == 1

    assert 'entity vocabulary' in capsys.readouterr().err
