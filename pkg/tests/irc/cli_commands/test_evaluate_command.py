import json
from pathlib import Path

from libirc.constants import CNA_ANSWER, AnswerLabel
from libirc.corpus import Example
from pytest import CaptureFixture, fixture

from irc import cli_commands


@fixture
def perfect_predictions(synthetic_examples: list[Example], tmp_path: Path) -> Path:
    answers, supporting = {}, {}
    for example in synthetic_examples:
        match example.gold_answer.label:
            case AnswerLabel.SPAN:
                answers[example.id] = example.gold_answer.span_text
            case AnswerLabel.CNA:
                answers[example.id] = CNA_ANSWER
            case label:
                answers[example.id] = str(label)
        supporting[example.id] = [[example.passage.sentence(i).paragraph_title, example.passage.sentence(i).position]
                                  for i in sorted(example.gold_rationale)]
    path = tmp_path / 'perfect.json'
    path.write_text(json.dumps({'answer': answers, 'sp': supporting}))
    return path


def test_evaluate_command(perfect_predictions: Path, dataset_file: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.evaluate(pred=str(perfect_predictions), gold=str(dataset_file)) == 0

    report = json.loads(capsys.readouterr().out)
    assert report['count'] == 12
    assert report['answer_em'] == 100.0
    assert report['sf_f1'] == 100.0
    assert report['cna']['f1'] == 100.0
    assert report['strata']['by_absent_class']['1']['ratio'] == 100.0
    assert Path(f'{perfect_predictions}.evaluate.manifest.json').is_file()


def test_evaluate_writes_report(perfect_predictions: Path, dataset_file: Path, tmp_path: Path) -> None:
    output = tmp_path / 'report.json'

    assert cli_commands.evaluate(pred=str(perfect_predictions), gold=str(dataset_file), output=str(output)) == 0

    assert json.loads(output.read_text())['answer_f1'] == 100.0
    assert json.loads(Path(f'{output}.manifest.json').read_text())['outputs'] == {'report': str(output)}


def test_evaluate_table(perfect_predictions: Path, dataset_file: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.evaluate(pred=str(perfect_predictions), gold=str(dataset_file), table=True) == 0

    out = capsys.readouterr().out
    assert 'Scores (%)' in out
    assert 'CNA prediction ratio' in out


def test_evaluate_missing_prediction(dataset_file: Path, tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    pred = tmp_path / 'partial.json'
    pred.write_text(json.dumps({'answer': {}, 'sp': {}}))

    assert cli_commands.evaluate(pred=str(pred), gold=str(dataset_file)) == 1

    assert 'No prediction for example' in capsys.readouterr().err


def test_evaluate_unreadable_predictions(dataset_file: Path, tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.evaluate(pred=str(tmp_path / 'missing.json'), gold=str(dataset_file)) == 1

    assert 'Cannot read predictions' in capsys.readouterr().err
