"""Custom exceptions for poisonwatch.

Every failure the toolkit raises on purpose derives from PoisonWatchError.
The CLI maps the families below onto exit codes: data and format problems
exit 2, pipeline failures exit 3.
"""

from poisonwatch.core.logger import LoggerManager

logger = LoggerManager.get_logger(__name__)


class PoisonWatchError(Exception):
    """Base exception class for poisonwatch errors.

    All other poisonwatch exceptions should inherit from this class.
    """

    exit_code: int = 3

    def __init__(self, message: str, context: str | None = None) -> None:
        """Initialize the error with an optional context tag.

        Args:
            message: Detailed error description
            context: Optional location of the failure (layer, file, sample)

        """
        self.context = context
        super().__init__(f"{context}: {message}" if context else message)


class ValidationError(PoisonWatchError):
    """Raised when an argument or a data value violates a precondition.

    Examples:
        - class index outside the model's classes
        - pixel index outside the image
        - a rate requested over an empty set

    """

    exit_code = 2


class ShapeError(ValidationError):
    """Raised when tensor shapes do not line up with a layer."""

    pass


class FileAccessError(PoisonWatchError):
    """Raised when there are issues accessing files.

    Examples:
        - File not found
        - Permission denied
        - Destination directory not writable

    """

    exit_code = 2


class ContainerFormatError(PoisonWatchError):
    """Raised when a model, dataset or pattern file is corrupt or from another version."""

    exit_code = 2


class TrainingDivergedError(PoisonWatchError):
    """Raised when the training loss stops being finite."""

    pass


class NoMisclassificationError(PoisonWatchError):
    """Raised when no mis-classification pattern exists; the model may be clean."""

    pass


class EmptySupportError(PoisonWatchError):
    """Raised when an aggregate is requested over an empty group of inputs."""

    pass


class PipelineError(PoisonWatchError):
    """Raised when a stage of an experiment or pipeline fails."""

    pass
