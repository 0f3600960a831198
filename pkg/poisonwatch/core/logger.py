"""Package-wide logging: every module logs under the "poisonwatch" logger tree."""

import logging
import sys
from pathlib import Path
from typing import Any

from pydantic import BaseModel

PACKAGE_LOGGER = "poisonwatch"


class LogConfig(BaseModel):
    """Active logging setup.

    Attributes:
        level: Numeric level of the package logger
        format: Record format
        date_format: Timestamp format
        file_path: File mirroring the console records, if any

    """

    level: int = logging.WARNING
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    date_format: str = "%Y-%m-%d %H:%M:%S"
    file_path: Path | None = None

    def formatter(self) -> logging.Formatter:
        return logging.Formatter(self.format, self.date_format)


class LoggerManager:
    """Owner of the package logger's handlers.

    Records go to standard error and optionally to one file. Standard output
    stays reserved for the machine-readable results of the CLI.
    """

    _config: LogConfig = LogConfig()
    _console: logging.Handler | None = None
    _file: logging.Handler | None = None

    @classmethod
    def _package(cls) -> logging.Logger:
        return logging.getLogger(PACKAGE_LOGGER)

    @classmethod
    def _handlers(cls) -> list[logging.Handler]:
        return [h for h in (cls._console, cls._file) if h is not None]

    @classmethod
    def initialize(
        cls,
        level: int = logging.WARNING,
        format_str: str | None = None,
        date_format: str | None = None,
    ) -> None:
        """Set level and format. The console handler is created once and reused.

        Args:
            level: Numeric logging level
            format_str: Optional record format
            date_format: Optional timestamp format

        """
        update: dict[str, Any] = {"level": level}
        if format_str:
            update["format"] = format_str
        if date_format:
            update["date_format"] = date_format
        cls._config = cls._config.model_copy(update=update)

        package = cls._package()
        package.setLevel(level)
        if cls._console is None:
            cls._console = logging.StreamHandler(sys.stderr)
            package.addHandler(cls._console)
        for handler in cls._handlers():
            handler.setFormatter(cls._config.formatter())

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """Module logger; the first call installs the console handler."""
        if cls._console is None:
            cls.initialize(cls._config.level)
        return logging.getLogger(name)

    @classmethod
    def add_file_handler(cls, file_path: Path) -> None:
        """Mirror package records into file_path, replacing any previous file.

        An unopenable file is reported on the console and otherwise ignored.
        """
        try:
            handler = logging.FileHandler(file_path)
        except OSError as e:
            cls._package().warning(f"Cannot log to {file_path}: {e}")
            return
        cls.remove_file_handler()
        handler.setFormatter(cls._config.formatter())
        cls._package().addHandler(handler)
        cls._file = handler
        cls._config = cls._config.model_copy(update={"file_path": file_path})

    @classmethod
    def remove_file_handler(cls) -> None:
        if cls._file is None:
            return
        cls._package().removeHandler(cls._file)
        cls._file.close()
        cls._file = None
        cls._config = cls._config.model_copy(update={"file_path": None})
