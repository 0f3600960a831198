"""Heatmaps and important-pixel selections."""

import math
from typing import Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from poisonwatch.core.exceptions import ValidationError

AttributionMethod = Literal["gradcam", "gradcam++", "input-gradient"]


def _frozen_map(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.ndim != 2:
        raise ValueError(f"heatmap values must be H x W, got shape {array.shape}")
    if not np.isfinite(array).all():
        raise ValueError("heatmap values must be finite")
    array.setflags(write=False)
    return array


class Heatmap(BaseModel):
    """Non-negative class evidence per input pixel.

    Attributes:
        values: H x W map at input resolution
        class_index: Class whose score was attributed
        method: Attribution method
        count: Number of per-image maps averaged into this one

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    class_index: int = Field(ge=0)
    method: AttributionMethod = "gradcam"
    count: int = Field(default=1, ge=1)

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, value: Any) -> np.ndarray:
        array = _frozen_map(value)
        if (array < 0).any():
            raise ValueError("heatmap values must be non-negative")
        return array

    @property
    def shape(self) -> tuple[int, int]:
        height, width = self.values.shape
        return height, width


class NormalizedHeatmap(BaseModel):
    """A heatmap scaled to unit sum, or all zeros flagged degenerate."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    degenerate: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, value: Any) -> np.ndarray:
        return _frozen_map(value)

    @model_validator(mode="after")
    def validate_sum(self) -> Self:
        if self.degenerate:
            if self.values.any():
                raise ValidationError("a degenerate normalized heatmap must be all zeros")
        elif (self.values < 0).any() or abs(self.values.sum() - 1.0) > 1e-6:
            raise ValidationError(f"normalized heatmap must be non-negative with unit sum, got {self.values.sum()}")
        return self


class DeltaHeatmap(BaseModel):
    """Difference of two normalized heatmaps; positive values point at trigger pixels."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, value: Any) -> np.ndarray:
        return _frozen_map(value)


def pixel_budget(threshold_percent: float, pixel_count: int) -> int:
    """round(threshold% of pixel_count), halves rounded up."""
    return math.floor(threshold_percent / 100.0 * pixel_count + 0.5 + 1e-9)


class ImportantPixels(BaseModel):
    """Per-pattern row-major pixel indices, aligned with a PatternSet.

    Attributes:
        pixels: For each pattern, indices ordered by descending delta value
        threshold_percent: Share of the image selected per pattern
        shape: (H, W) of the maps the indices point into

    """

    model_config = ConfigDict(frozen=True)

    pixels: tuple[tuple[int, ...], ...] = ()
    threshold_percent: float = Field(gt=0.0, le=100.0)
    shape: tuple[int, int]

    @model_validator(mode="after")
    def validate_pixels(self) -> Self:
        size = self.shape[0] * self.shape[1]
        expected = pixel_budget(self.threshold_percent, size)
        for index, selection in enumerate(self.pixels):
            if len(selection) != expected:
                raise ValidationError(f"pattern {index} lists {len(selection)} pixels, expected {expected}")
            if len(set(selection)) != len(selection) or any(not 0 <= p < size for p in selection):
                raise ValidationError(f"pattern {index} has duplicate or out-of-range pixel indices")
        return self

    def __len__(self) -> int:
        return len(self.pixels)
