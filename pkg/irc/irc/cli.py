"""Command Line Interface (CLI) for IRC."""

import argparse
import logging
import sys
from collections.abc import Sequence
from typing import Any

from libirc.constants import SWEEP_START, SWEEP_STEP, SWEEP_STOP

from irc import cli_commands

_store_args: dict[str, dict[str, Any]] = {
    'store': {
        'type': str,
        'help': '📁 Checkpoint directory holding the vocabulary and the trained models',
        'required': True,
    },
}

_config_args: dict[str, dict[str, Any]] = {
    'config': {
        'type': str,
        'help': '⚙️ Flat JSON file of configuration values',
    },
    'seed': {
        'type': int,
        'help': '🎲 Random seed',
    },
}

_optimizer_args: dict[str, dict[str, Any]] = {
    'learning_rate': {
        'type': float,
        'help': '📉 AdamW learning rate',
    },
    'batch_size': {
        'type': int,
        'help': '📦 Examples per optimizer step',
    },
}


def cli(argv: Sequence[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description='IRC Command Line Interface')
    parser.add_argument('-v', '--verbose', action='store_true', help='🔊 Log debug messages')
    commands_sub = parser.add_subparsers(title='✨ Available Commands ✨', dest='command',
                                         help='Choose a command to execute')

    # Dictionary to map command names to their functions and descriptions
    commands: dict[str, dict[str, Any]] = {
        'gen-synthetic': {
            'func': cli_commands.gen_synthetic,
            'args': {
                'output': {
                    'type': str,
                    'help': '📄 JSON Lines file to write',
                    'required': True,
                },
                'num_examples': {
                    'type': int,
                    'help': '🔢 Number of examples',
                    'default': 200,
                },
                'entity_vocabulary': {
                    'type': int,
                    'help': '🔤 Size of the closed entity vocabulary',
                    'default': 500,
                },
                'paragraphs': {
                    'type': int,
                    'help': '📚 Paragraphs per passage',
                    'default': 4,
                },
                'sentences': {
                    'type': int,
                    'help': '📝 Sentences per paragraph',
                    'default': 3,
                },
                'cna_fraction': {
                    'type': float,
                    'help': '🚫 Fraction of CNA examples',
                    'default': 0.3,
                },
                'yes_no_fraction': {
                    'type': float,
                    'help': '❓ Fraction of yes/no questions',
                    'default': 0.0,
                },
                'seed': {
                    'type': int,
                    'help': '🎲 Random seed',
                    'default': 0,
                },
            },
            'help': '🧪 Generate a synthetic two-hop corpus',
        },

        'build-dataset': {
            'func': cli_commands.build_dataset,
            'args': {
                'input': {
                    'type': str,
                    'help': '📥 Annotated dataset (HotpotQA .json or .jsonl)',
                    'required': True,
                },
                'output': {
                    'type': str,
                    'help': '📄 JSON Lines file to write',
                    'required': True,
                },
                'retrieval': {
                    'type': str,
                    'help': '🔎 Retrieved passages to substitute, matched by id',
                },
                'augment_cna': {
                    'type': None,
                    'help': '➕ Add one negative-sampled CNA example per query',
                    'default': False,
                    'flag': True,
                },
                'ngram_max': {
                    'type': int,
                    'help': '🔤 Longest TF-IDF n-gram',
                    'default': 1,
                },
                'seed': {
                    'type': int,
                    'help': '🎲 Random seed',
                    'default': 0,
                },
            },
            'help': '🏗️ Label retrieved passages with CNA and optionally augment',
        },

        'pretrain': {
            'func': cli_commands.pretrain,
            'args': {
                'train': {
                    'type': str,
                    'help': '📥 Training dataset',
                    'required': True,
                },
                **_store_args,
                'module': {
                    'type': str,
                    'help': '🧩 Module to pretrain',
                    'default': 'all',
                    'choices': ['extractor', 'answerer', 'ranker', 'all'],
                },
                **_config_args,
                **_optimizer_args,
                'pretrain_epochs': {
                    'type': int,
                    'help': '🔁 Pretraining epochs',
                },
            },
            'help': '🎓 Pretrain the extraction, answer and ranking modules',
        },

        'train-e2e': {
            'func': cli_commands.train_e2e,
            'args': {
                'train': {
                    'type': str,
                    'help': '📥 Training dataset',
                    'required': True,
                },
                **_store_args,
                **_config_args,
                **_optimizer_args,
                'e2e_epochs': {
                    'type': int,
                    'help': '🔁 End-to-end epochs',
                },
                'lambda_r': {
                    'type': float,
                    'help': '⚖️ Weight of the rationale loss',
                },
                'lambda_na': {
                    'type': float,
                    'help': '⚖️ Weight of the no-answer loss',
                },
                'tau': {
                    'type': float,
                    'help': '🌡️ Gumbel-softmax temperature',
                },
                'freeze_answerer': {
                    'type': None,
                    'help': '🧊 Keep the answer module fixed',
                    'default': False,
                    'flag': True,
                },
                'resume': {
                    'type': None,
                    'help': '⏯️ Continue from the saved trainer state',
                    'default': False,
                    'flag': True,
                },
            },
            'help': '🔗 Train both modules end to end',
        },

        'infer': {
            'func': cli_commands.infer,
            'args': {
                'data': {
                    'type': str,
                    'help': '📥 Dataset to predict on',
                    'required': True,
                },
                **_store_args,
                'output': {
                    'type': str,
                    'help': '📄 Prediction file to write',
                    'required': True,
                },
                **_config_args,
                'alpha': {
                    'type': float,
                    'help': '✂️ Extraction threshold',
                },
                'beta': {
                    'type': float,
                    'help': '🚫 CNA threshold',
                },
                'k': {
                    'type': int,
                    'help': '🔝 Paragraph pairs per query',
                },
                'n_r': {
                    'type': int,
                    'help': '📏 Rationale size at which growth stops',
                },
                'distractor': {
                    'type': None,
                    'help': '🙈 Never answer CNA',
                    'default': False,
                    'flag': True,
                },
            },
            'help': '🔮 Predict answers and rationales',
        },

        'evaluate': {
            'func': cli_commands.evaluate,
            'args': {
                'pred': {
                    'type': str,
                    'help': '📄 Prediction file',
                    'required': True,
                },
                'gold': {
                    'type': str,
                    'help': '🏅 Gold dataset',
                    'required': True,
                },
                'output': {
                    'type': str,
                    'help': '💾 Also write the report here',
                },
                'table': {
                    'type': None,
                    'help': '📊 Print tables instead of JSON',
                    'default': False,
                    'flag': True,
                },
            },
            'help': '📏 Score predictions against a gold dataset',
        },

        'sweep': {
            'func': cli_commands.sweep,
            'args': {
                'param': {
                    'type': str,
                    'help': '🎚️ Threshold to sweep',
                    'required': True,
                    'choices': ['alpha', 'beta'],
                },
                'range': {
                    'type': str,
                    'help': '📐 start:stop:step, stop included',
                    'default': f'{SWEEP_START}:{SWEEP_STOP}:{SWEEP_STEP}',
                },
                'dev': {
                    'type': str,
                    'help': '📥 Development dataset',
                    'required': True,
                },
                **_store_args,
                **_config_args,
                'output': {
                    'type': str,
                    'help': '💾 Write the sweep results here',
                },
            },
            'help': '🔍 Pick alpha or beta by F1 on a development set',
        },
    }

    # Register commands
    for command_name, command_info in commands.items():
        command_sub = commands_sub.add_parser(command_name, help=command_info['help'])
        for arg_name, arg_info in command_info['args'].items():
            option = f'--{arg_name.replace("_", "-")}'
            arg_help = arg_info['help']
            arg_default = arg_info.get('default')

            if arg_info.get('flag', False):
                command_sub.add_argument(option, dest=arg_name, help=arg_help, action='store_true',
                                         default=arg_default)
            elif arg_default is not None:
                command_sub.add_argument(option, dest=arg_name, type=arg_info['type'],
                                         help=f'{arg_help} (default: %(default)s)', default=arg_default,
                                         choices=arg_info.get('choices'))
            else:
                command_sub.add_argument(option, dest=arg_name, type=arg_info['type'], help=arg_help,
                                         required=arg_info.get('required', False), choices=arg_info.get('choices'))

    command_args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if command_args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    if command_args.command is None:
        parser.print_help()
    else:
        # Call the function associated with the command and exit with its return code
        command_info = commands[command_args.command]
        command_func = command_info['func']

        code = command_func(**command_args.__dict__)
        sys.exit(code)


if __name__ == '__main__':
    cli()
