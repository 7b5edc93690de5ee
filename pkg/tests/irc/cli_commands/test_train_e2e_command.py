import json
from pathlib import Path

from libirc.checkpoint import CheckpointStore
from pytest import CaptureFixture

from irc import cli_commands


def test_train_e2e_command(trained_store: CheckpointStore, dataset_file: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.train_e2e(train=str(dataset_file), store=str(trained_store.root), e2e_epochs=1,
                                  lambda_r=0.5, freeze_answerer=False, resume=False) == 0

    out = capsys.readouterr().out
    assert 'finished after 1 epochs' in out
    assert 'epoch 1: loss' in out
    assert trained_store.trainer_state_path().is_file()
    _, checkpoint = trained_store.load_model('extractor')
    assert checkpoint.training_config.lambda_r == 0.5
    assert checkpoint.extra['epoch_losses']

    manifest = json.loads((trained_store.root / 'train-e2e.manifest.json').read_text())
    assert manifest['config']['lambda_r'] == 0.5
    assert manifest['inputs'] == {'train': str(dataset_file)}


def test_train_e2e_without_store(dataset_file: Path, tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    assert cli_commands.train_e2e(train=str(dataset_file), store=str(tmp_path / 'missing')) == 1

    assert '❌ Error:' in capsys.readouterr().err


def test_train_e2e_without_pretrained_answerer(trained_store: CheckpointStore, dataset_file: Path,
                                               capsys: CaptureFixture[str]) -> None:
    trained_store.model_path('answerer').unlink()

    assert cli_commands.train_e2e(train=str(dataset_file), store=str(trained_store.root)) == 1

    assert '❌ Error:' in capsys.readouterr().err
