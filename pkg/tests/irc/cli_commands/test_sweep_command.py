import json
from pathlib import Path

from libirc.checkpoint import CheckpointStore
from libirc.evaluator import CnaDetection, MetricReport, Strata
from pytest import CaptureFixture, MonkeyPatch, mark, raises

from irc import cli_commands


def test_parse_range() -> None:
    assert cli_commands.parse_range('0:0.9:0.1') == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    assert cli_commands.parse_range('0.5:0.5:0.1') == [0.5]


@mark.parametrize('text', ['0:1', 'a:b:c', '0:0.9:0'])
def test_parse_invalid_range(text: str) -> None:
    with raises(ValueError):
        cli_commands.parse_range(text)


def test_sweep_beta(trained_store: CheckpointStore, dataset_file: Path, tmp_path: Path,
                    capsys: CaptureFixture[str]) -> None:
    output = tmp_path / 'sweep.json'

    assert cli_commands.sweep(param='beta', range='0:0.9:0.1', dev=str(dataset_file), store=str(trained_store.root),
                              output=str(output)) == 0

    results = json.loads(output.read_text())
    assert len(results['values']) == 10
    assert len(results['reports']) == 10
    assert results['best'] in results['values']
    assert max(results['scores']) == results['scores'][results['values'].index(results['best'])]
    assert results['scores'] == [r['answer_f1'] for r in results['reports']]
    assert 'over 10 evaluations' in capsys.readouterr().out
    assert Path(f'{output}.manifest.json').is_file()


def test_sweep_alpha(trained_store: CheckpointStore, dataset_file: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.sweep(param='alpha', range='0.2:0.4:0.2', dev=str(dataset_file),
                              store=str(trained_store.root)) == 0

    assert 'over 2 evaluations' in capsys.readouterr().out
    assert (trained_store.root / 'sweep.manifest.json').is_file()


def _report(answer_f1: float, sf_f1: float) -> MetricReport:
    return MetricReport(count=1, answer_em=answer_f1, answer_f1=answer_f1, sf_em=sf_f1, sf_precision=sf_f1,
                        sf_recall=sf_f1, sf_f1=sf_f1, cna=CnaDetection(0.0, 0.0, 0.0, 0.0), strata=Strata())


def test_sweep_alpha_picks_best_answer_f1(trained_store: CheckpointStore, dataset_file: Path, tmp_path: Path,
                                          monkeypatch: MonkeyPatch, capsys: CaptureFixture[str]) -> None:
    monkeypatch.setattr(cli_commands, '_sweep_reports', lambda *_: [_report(80.0, 40.0), _report(50.0, 90.0)])
    output = tmp_path / 'alpha.json'

    assert cli_commands.sweep(param='alpha', range='0:0.1:0.1', dev=str(dataset_file), store=str(trained_store.root),
                              output=str(output)) == 0

    results = json.loads(output.read_text())
    assert results['values'] == [0.0, 0.1]
    assert results['scores'] == [80.0, 50.0]
    assert results['best'] == 0.0
    assert 'Best alpha: 0.00 (F1 80.0)' in capsys.readouterr().out


def test_sweep_invalid_range(trained_store: CheckpointStore, dataset_file: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.sweep(param='alpha', range='0:1', dev=str(dataset_file), store=str(trained_store.root)) == 1

    assert 'Invalid range' in capsys.readouterr().err


def test_sweep_without_store(dataset_file: Path, tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.sweep(param='beta', dev=str(dataset_file), store=str(tmp_path / 'missing')) == 1

    assert '❌ Error:' in capsys.readouterr().err
