"""Image samples, trigger specifications and datasets."""

from typing import Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager

logger = LoggerManager.get_logger(__name__)

Corner = Literal["bottom-right", "bottom-left", "top-right", "top-left"]


class ImageSample(BaseModel):
    """One H x W x C image with its bookkeeping.

    Attributes:
        pixels: float32 values in [0, 1]
        ideal_label: Ground-truth class
        train_label: Label used for training (the target for poisoned training samples)
        poisoned: Whether a trigger was stamped on the image
        id: Unique sample id within a dataset

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pixels: np.ndarray
    ideal_label: int = Field(ge=0)
    train_label: int = Field(default=-1)
    poisoned: bool = False
    id: int = Field(ge=0)

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_pixels(cls, value: Any) -> np.ndarray:
        """Pixels are a read-only float32 H x W x C array within [0, 1]."""
        array = np.array(value, dtype=np.float32)
        if array.ndim != 3:
            raise ValueError(f"pixels must be H x W x C, got shape {array.shape}")
        if array.size and (not np.isfinite(array).all() or array.min() < 0.0 or array.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def default_train_label(self) -> Self:
        """An unset train label mirrors the ideal label."""
        if self.train_label < 0:
            object.__setattr__(self, "train_label", self.ideal_label)
        return self

    @property
    def shape(self) -> tuple[int, int, int]:
        """Image shape (H, W, C)."""
        height, width, channels = self.pixels.shape
        return height, width, channels


class PoisonSpec(BaseModel):
    """A BadNets-style rectangular patch trigger.

    Attributes:
        patch_height: Patch rows
        patch_width: Patch columns
        anchor: Top-left (row, col) of the patch, or a named corner
        patch_color: One value for every channel, or one value per channel
        target_label: Class the backdoor maps triggered inputs to

    """

    model_config = ConfigDict(frozen=True)

    patch_height: int = Field(ge=0)
    patch_width: int = Field(ge=0)
    anchor: tuple[int, int] | Corner = "bottom-right"
    patch_color: tuple[float, ...] = (1.0,)
    target_label: int = Field(ge=0)

    @field_validator("patch_color", mode="before")
    @classmethod
    def validate_color(cls, value: Any) -> tuple[float, ...]:
        """Colors are per-channel values in [0, 1]."""
        values = (float(value),) if isinstance(value, int | float) else tuple(float(v) for v in value)
        if not values or any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("patch_color values must lie in [0, 1]")
        return values

    def origin(self, height: int, width: int) -> tuple[int, int]:
        """Top-left pixel of the patch inside an image of the given size.

        Raises:
            ValidationError: When the patch does not fit

        """
        if isinstance(self.anchor, tuple):
            row, col = self.anchor
        else:
            row = 0 if self.anchor.startswith("top") else height - self.patch_height
            col = 0 if self.anchor.endswith("left") else width - self.patch_width
        if row < 0 or col < 0 or row + self.patch_height > height or col + self.patch_width > width:
            raise ValidationError(
                f"{self.patch_height}x{self.patch_width} patch at ({row}, {col}) does not fit a {height}x{width} image"
            )
        return row, col

    def mask(self, height: int, width: int) -> np.ndarray:
        """Boolean H x W map of the patch rectangle."""
        row, col = self.origin(height, width)
        mask = np.zeros((height, width), dtype=bool)
        mask[row : row + self.patch_height, col : col + self.patch_width] = True
        return mask

    def color_for(self, channels: int) -> np.ndarray:
        """Per-channel patch color."""
        if len(self.patch_color) == 1:
            return np.full(channels, self.patch_color[0], dtype=np.float32)
        if len(self.patch_color) != channels:
            raise ValidationError(f"patch_color has {len(self.patch_color)} values for {channels} channels")
        return np.array(self.patch_color, dtype=np.float32)


class SplitSpec(BaseModel):
    """GEN/VAL split parameters.

    Attributes:
        alpha: Fraction of the remaining poisoned inputs placed in GEN
        seed: Seed of the split

    """

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0.0, le=1.0)
    seed: int = 0


class Dataset(BaseModel):
    """An ordered collection of image samples.

    Attributes:
        samples: Samples in dataset order
        class_count: Number of classes
        provenance: Seed and generator parameters that produced the data

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: tuple[ImageSample, ...]
    class_count: int = Field(ge=1)
    provenance: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_samples(self) -> Self:
        """Ids are unique, labels fit, shapes agree."""
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValidationError("sample ids must be unique")
        shapes = {s.shape for s in self.samples}
        if len(shapes) > 1:
            raise ValidationError(f"samples disagree on shape: {sorted(shapes)}")
        for sample in self.samples:
            if sample.ideal_label >= self.class_count or sample.train_label >= self.class_count:
                raise ValidationError(f"labels exceed class_count {self.class_count}", context=f"sample {sample.id}")
        return self

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def image_shape(self) -> tuple[int, int, int] | None:
        """Shared image shape, None when empty."""
        return self.samples[0].shape if self.samples else None

    def images(self) -> np.ndarray:
        """Stacked pixels, (N, H, W, C)."""
        if not self.samples:
            return np.zeros((0, 0, 0, 0), dtype=np.float32)
        return np.stack([s.pixels for s in self.samples])

    def ideal_labels(self) -> np.ndarray:
        return np.array([s.ideal_label for s in self.samples], dtype=np.int64)

    def train_labels(self) -> np.ndarray:
        return np.array([s.train_label for s in self.samples], dtype=np.int64)

    def clean(self) -> "Dataset":
        """Sub-dataset of samples without a trigger."""
        return self.subset([s for s in self.samples if not s.poisoned])

    def poisoned(self) -> "Dataset":
        """Sub-dataset of triggered samples."""
        return self.subset([s for s in self.samples if s.poisoned])

    def subset(self, samples: list[ImageSample]) -> "Dataset":
        """New dataset over the given samples, same classes and provenance."""
        return Dataset(samples=tuple(samples), class_count=self.class_count, provenance=dict(self.provenance))
