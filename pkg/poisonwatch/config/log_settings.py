"""Logging settings: LOG_* environment variables, overridden by CLI flags."""

import logging
from pathlib import Path
from typing import ClassVar, Optional, Self

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from poisonwatch.config.base_config import BaseConfig
from poisonwatch.core.logger import LoggerManager

LOG_LEVELS: dict[str, int] = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


class LogSettings(BaseSettings):
    """Where and how verbosely poisonwatch logs.

    Attributes:
        level: Level name, one of LOG_LEVELS
        file_enabled: Mirror records into log_file
        log_file: Log file path
        format: Record format
        date_format: Timestamp format

    """

    _instance: ClassVar[Optional["LogSettings"]] = None

    level: str = Field(default="WARNING")
    file_enabled: bool = Field(default=False)
    log_file: Path | None = Field(default=None)
    format: str = Field(default_factory=lambda: BaseConfig.get_instance().format)
    date_format: str = Field(default_factory=lambda: BaseConfig.get_instance().date_format)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_ignore_empty=True,
        extra="ignore",
        env_prefix="LOG_",
    )

    @classmethod
    def get_instance(cls) -> "LogSettings":
        """Get the singleton instance of LogSettings."""
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @model_validator(mode="after")
    def validate_settings(self) -> Self:
        self.level = self.level.upper()
        if self.level not in LOG_LEVELS:
            raise ValueError(f"Invalid log level {self.level!r}, expected one of {', '.join(LOG_LEVELS)}")
        if self.file_enabled and self.log_file is None:
            raise ValueError("file_enabled requires log_file")
        return self

    @property
    def level_value(self) -> int:
        return LOG_LEVELS[self.level]

    def with_overrides(self, level: str | None = None, log_file: Path | None = None) -> "LogSettings":
        """Copy with command-line overrides applied and validated."""
        values = self.model_dump()
        if level is not None:
            values["level"] = level
        if log_file is not None:
            values.update(file_enabled=True, log_file=log_file)
        return type(self).model_validate(values)

    def apply(self) -> None:
        """Push these settings into LoggerManager."""
        LoggerManager.initialize(level=self.level_value, format_str=self.format, date_format=self.date_format)
        if self.file_enabled and self.log_file is not None:
            LoggerManager.add_file_handler(self.log_file)
        else:
            LoggerManager.remove_file_handler()
