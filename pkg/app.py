import logging
from typing import List, Optional

import click

from config import Config
from models import ConfigError, SluError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper()), format=Config.LOG_FORMAT, force=True)


def register_commands(cli: click.Group, group: click.Group) -> None:
    """Expose every command of a view group at the top level"""
    for name, command in group.commands.items():
        cli.add_command(command, name)


def create_app() -> click.Group:
    @click.group(help="Cross-lingual SLU with dual-model knowledge distillation")
    @click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
                  default=Config.LOG_LEVEL, show_default=True)
    def cli(log_level):
        configure_logging(log_level)

    from views.data import data_cli
    from views.train import train_cli
    from views.reports import reports_cli
    from views.verify import verify_cli
    register_commands(cli, data_cli)
    register_commands(cli, train_cli)
    register_commands(cli, reports_cli)
    register_commands(cli, verify_cli)

    return cli


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and map failures to exit codes: 1 usage/config, 2 runtime"""
    cli = create_app()
    try:
        result = cli.main(args=argv, prog_name='xslu', standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except ConfigError as exc:
        logger.error("%s", exc)
        click.echo(f"Error: {exc}", err=True)
        return EXIT_USAGE
    except (SluError, OSError) as exc:
        logger.error("%s", exc)
        click.echo(f"Error: {exc}", err=True)
        return EXIT_RUNTIME
    except Exception as exc:
        logger.exception("Unexpected failure")
        click.echo(f"Error: {exc}", err=True)
        return EXIT_RUNTIME
    # --help and friends return an exit code in non-standalone mode
    return result if isinstance(result, int) else EXIT_OK
