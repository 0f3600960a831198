"""Base file manager with common functionality."""

import os
import tempfile
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field

from poisonwatch.core.exceptions import FileAccessError
from poisonwatch.core.logger import LoggerManager

logger = LoggerManager.get_logger(__name__)


class BaseFileManager(BaseModel):
    """Path validation and atomic writes shared by every container format.

    Attributes:
        path: Base directory for relative file names

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, validate_assignment=True, extra="forbid")

    path: Path | None = Field(default=None)

    def resolve(self, file_path: Path | str) -> Path:
        """Resolve a file name against the base directory."""
        file_path = Path(file_path)
        if self.path is not None and not file_path.is_absolute():
            return self.path / file_path
        return file_path

    def validate_file(self, file_path: Path | str) -> Path:
        """Validate that a file exists and is readable."""
        resolved = self.resolve(file_path)
        if not resolved.exists():
            raise FileAccessError("file does not exist", context=str(resolved))
        if not resolved.is_file():
            raise FileAccessError("path exists but is not a file", context=str(resolved))
        return resolved

    def validate_directory(self, dir_path: Path | str, create: bool = True) -> Path:
        """Validate (and optionally create) a directory."""
        return self._ensure_directory(self.resolve(dir_path), create)

    def _ensure_directory(self, resolved: Path, create: bool = True) -> Path:
        if not resolved.exists():
            if not create:
                raise FileAccessError("directory does not exist", context=str(resolved))
            try:
                resolved.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise FileAccessError(f"cannot create directory: {e}", context=str(resolved)) from e
            logger.info(f"Created directory: {resolved}")
        if not resolved.is_dir():
            raise FileAccessError("path is not a directory", context=str(resolved))
        return resolved

    def read_bytes(self, file_path: Path | str) -> bytes:
        """Read a whole file."""
        resolved = self.validate_file(file_path)
        try:
            return resolved.read_bytes()
        except OSError as e:
            raise FileAccessError(f"cannot read file: {e}", context=str(resolved)) from e

    def atomic_write_bytes(self, file_path: Path | str, content: bytes) -> Path:
        """Write through a temp file in the destination directory, then rename.

        A failure part-way leaves no file at the destination.
        """
        resolved = self.resolve(file_path)
        directory = self._ensure_directory(resolved.parent)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{resolved.name}.", suffix=".tmp", dir=directory)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(content)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_name, resolved)
        except OSError as e:
            Path(tmp_name).unlink(missing_ok=True)
            raise FileAccessError(f"cannot write file: {e}", context=str(resolved)) from e
        logger.info(f"Wrote {len(content)} bytes to {resolved}")
        return resolved

    def atomic_write_text(self, file_path: Path | str, content: str) -> Path:
        """UTF-8 text variant of atomic_write_bytes."""
        return self.atomic_write_bytes(file_path, content.encode("utf-8"))
