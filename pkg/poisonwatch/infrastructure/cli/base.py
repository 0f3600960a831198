"""Base classes for the command-line surface."""

from typing import Any

import click
from click import Option
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console

from poisonwatch.core.logger import LoggerManager

logger = LoggerManager.get_logger(__name__)

# Summaries for humans go to standard error; standard output carries results.
console = Console(stderr=True)


def short_flags(param: click.Parameter) -> set[str]:
    """Single-dash one-letter flags of an option, e.g. {"-o"}."""
    if not isinstance(param, click.Option):
        return set()
    return {flag for flag in (*param.opts, *param.secondary_opts) if len(flag) == 2 and flag[0] == "-"}


class CLICommand(click.Command):
    """Click command of one subcommand; option names and short flags must not clash."""

    def __init__(self, name: str, **kwargs: Any) -> None:
        params = kwargs.pop("params", [])
        super().__init__(name, params=[], **kwargs)
        for param in params:
            self.add_parameter(param)

    def add_parameter(self, param: click.Parameter) -> None:
        """Register an option of this subcommand.

        Raises:
            ValueError: When the option's destination name or one of its short
                flags is already taken within the subcommand

        """
        if any(p.name == param.name for p in self.params):
            raise ValueError(f"{self.name}: option {param.name!r} is declared twice")
        taken = set().union(*(short_flags(p) for p in self.params))
        clash = sorted(short_flags(param) & taken)
        if clash:
            raise ValueError(f"{self.name}: short flag {', '.join(clash)} of {param.name!r} is already taken")
        self.params.append(param)


class SubcommandCLI(BaseModel):
    """One subcommand: its options, its help text and the action it runs.

    Subclasses set name and help, declare their options in setup_options and
    implement run, which receives the parsed options as keyword arguments.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, validate_assignment=True)

    name: str
    help: str = ""
    command: CLICommand | None = Field(default=None)

    def model_post_init(self, __context: Any) -> None:
        """Build the click command once the subclass fields are set."""
        self.command = CLICommand(name=self.name, help=self.help, callback=self.run, no_args_is_help=False)
        self.setup_options()

    def setup_options(self) -> None:
        """Declare the options of the subcommand."""

    def add_option(self, *args: Any, **kwargs: Any) -> None:
        """Add an option to the subcommand."""
        assert self.command is not None
        self.command.add_parameter(Option(*args, **kwargs))

    def run(self, **kwargs: Any) -> None:
        raise NotImplementedError

    @staticmethod
    def threads() -> int:
        """Worker cap chosen on the root command."""
        ctx = click.get_current_context()
        root = ctx.find_root()
        return int((root.obj or {}).get("threads", 1))
