"""Validated invocation of a subcommand."""

from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from poisonwatch.core.exceptions import FileAccessError
from poisonwatch.core.logger import LoggerManager

logger = LoggerManager.get_logger(__name__)


class CommandConfig(BaseModel):
    """One subcommand invocation, checked before any stage runs.

    Attributes:
        subcommand: Name of the subcommand
        flags: Parsed option values
        inputs: Files the subcommand reads
        outputs: Files the subcommand writes
        seed: Master seed, when the subcommand is seeded
        threads: Worker cap

    """

    model_config = ConfigDict(frozen=True)

    subcommand: str
    flags: dict[str, Any] = Field(default_factory=dict)
    inputs: tuple[Path, ...] = ()
    outputs: tuple[Path, ...] = ()
    seed: int | None = None
    threads: int = Field(default=1, ge=1)

    def validate_paths(self) -> "CommandConfig":
        """Check every input is a readable file and every output has a usable parent.

        Raises:
            FileAccessError: On the first path that fails

        """
        for path in self.inputs:
            if not path.is_file():
                raise FileAccessError("input file does not exist", context=str(path))
        for path in self.outputs:
            parent = path.parent if str(path.parent) else Path(".")
            if parent.exists() and not parent.is_dir():
                raise FileAccessError("output parent is not a directory", context=str(path))
            if path.is_dir():
                raise FileAccessError("output path is a directory", context=str(path))
        logger.info(f"{self.subcommand}: {len(self.inputs)} inputs and {len(self.outputs)} outputs validated")
        return self
