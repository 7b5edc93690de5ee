"""Entry point for the command-line interface (CLI) of the IRC package."""

from irc.cli import cli


def main() -> None:
    cli()


if __name__ == '__main__':
    main()
