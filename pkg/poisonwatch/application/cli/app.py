"""Root command group and exit-code mapping."""

from collections.abc import Sequence
from pathlib import Path

import click
import pydantic

from poisonwatch.application.cli.commands.analysis import AttributeCLI, MineCLI
from poisonwatch.application.cli.commands.data import ForgeCLI, PoisonCLI, SplitCLI
from poisonwatch.application.cli.commands.evaluate import EvaluateCLI, PipelineCLI
from poisonwatch.application.cli.commands.monitor import MonitorCLI, ServeCLI
from poisonwatch.application.cli.commands.train import TrainCLI
from poisonwatch.config.log_settings import LOG_LEVELS, LogSettings
from poisonwatch.core.exceptions import PoisonWatchError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.infrastructure.cli.base import SubcommandCLI

logger = LoggerManager.get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PIPELINE = 3

SUBCOMMANDS: tuple[type[SubcommandCLI], ...] = (
    ForgeCLI,
    PoisonCLI,
    SplitCLI,
    TrainCLI,
    MineCLI,
    AttributeCLI,
    MonitorCLI,
    ServeCLI,
    EvaluateCLI,
    PipelineCLI,
)


@click.group(name="poisonwatch", context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--log-level",
    type=click.Choice(list(LOG_LEVELS), case_sensitive=False),
    default=None,
    help="Logging level (default from LOG_LEVEL or WARNING)",
)
@click.option("--log-file", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Mirror logs here")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True, help="Worker cap")
@click.pass_context
def cli(ctx: click.Context, log_level: str | None, log_file: Path | None, threads: int) -> None:
    """Detect and repair backdoor-poisoned inputs of image classifiers."""
    LogSettings.get_instance().with_overrides(log_level, log_file).apply()
    ctx.obj = {"threads": threads}


for _subcommand in SUBCOMMANDS:
    _command = _subcommand().command
    assert _command is not None
    cli.add_command(_command)


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and map the outcome to an exit code.

    0 success, 1 usage error, 2 data or format error, 3 pipeline failure.
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="poisonwatch", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("Aborted.", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except PoisonWatchError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return e.exit_code
    except pydantic.ValidationError as e:
        logger.error(f"Invalid arguments: {e}")
        click.echo(f"Error: {e}", err=True)
        return EXIT_DATA
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        click.echo(f"Error: {e}", err=True)
        return EXIT_PIPELINE
    return result if isinstance(result, int) else EXIT_OK
