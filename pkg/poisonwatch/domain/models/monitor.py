"""Run-time defense configuration and per-input outcomes."""

from typing import Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.domain.models.heatmaps import ImportantPixels
from poisonwatch.domain.models.patterns import PatternSet

CorrectionMode = Literal["input_mask", "label_guess"]


class MonitorConfig(BaseModel):
    """Everything the run-time monitor needs, immutable once built.

    Attributes:
        patterns: P, mis-classification patterns toward the target, support-descending
        imp_pixels: Pixels to mask, aligned index-for-index with patterns
        mask_value: Neutral value, one for all channels or one per channel
        mode: input_mask (repair the image) or label_guess (guess via pc_patterns)
        pc_patterns: P_c, correct-label patterns used by label_guess
        target_label: Poison target, excluded from random guesses
        class_count: Number of classes of the monitored model
        seed: Seed of the label-guess fallback

    """

    model_config = ConfigDict(frozen=True)

    patterns: PatternSet = Field(default_factory=PatternSet)
    imp_pixels: ImportantPixels | None = None
    mask_value: tuple[float, ...] = (0.0,)
    mode: CorrectionMode = "input_mask"
    pc_patterns: PatternSet | None = None
    target_label: int | None = None
    class_count: int = Field(default=2, ge=1)
    seed: int = 0

    @field_validator("mask_value", mode="before")
    @classmethod
    def validate_mask_value(cls, value: Any) -> tuple[float, ...]:
        values = (float(value),) if isinstance(value, int | float) else tuple(float(v) for v in value)
        if not values:
            raise ValueError("mask_value needs at least one value")
        return values

    @model_validator(mode="after")
    def validate_mode(self) -> Self:
        if self.mode == "input_mask":
            pixel_count = len(self.imp_pixels) if self.imp_pixels is not None else 0
            if pixel_count != len(self.patterns):
                raise ValidationError(f"{len(self.patterns)} patterns but {pixel_count} important-pixel lists")
        if self.mode == "label_guess" and self.pc_patterns is None:
            raise ValidationError("label_guess mode needs correct-label patterns")
        return self


class Verdict(BaseModel):
    """Detection outcome for one input.

    Pattern verdicts carry the matched pattern index exactly when poisoned;
    STRIP verdicts never carry one.
    """

    model_config = ConfigDict(frozen=True)

    outcome: Literal["clean", "poisoned"]
    matched_pattern_index: int | None = None
    source: Literal["pattern", "strip"] = "pattern"

    @model_validator(mode="after")
    def validate_index(self) -> Self:
        if self.source == "pattern" and (self.outcome == "poisoned") != (self.matched_pattern_index is not None):
            raise ValidationError("a pattern verdict is poisoned exactly when it names a pattern")
        if self.source == "strip" and self.matched_pattern_index is not None:
            raise ValidationError("a STRIP verdict does not name a pattern")
        return self

    @property
    def poisoned(self) -> bool:
        return self.outcome == "poisoned"


class DefenseResult(BaseModel):
    """Final decision of the monitor for one input."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sample_id: int = 0
    original_label: int
    final_label: int
    verdict: Verdict
    corrected_image: np.ndarray | None = None

    @model_validator(mode="after")
    def validate_clean(self) -> Self:
        if not self.verdict.poisoned and (
            self.final_label != self.original_label or self.corrected_image is not None
        ):
            raise ValidationError("a clean verdict keeps the original label and the original image")
        return self

    def as_record(self) -> dict[str, Any]:
        """JSON-lines record."""
        return {
            "id": self.sample_id,
            "verdict": self.verdict.outcome,
            "matched_pattern": self.verdict.matched_pattern_index,
            "original_label": self.original_label,
            "final_label": self.final_label,
        }


class DefenseArtifacts(BaseModel):
    """Offline-analysis output: P, its important pixels and optionally P_c.

    Attributes:
        layer_id: Monitored layer
        target_label: Inferred poison target
        class_count: Classes of the analyzed model
        patterns: P
        imp_pixels: pix_p per pattern of P, once attribution has run
        pc_patterns: P_c, when mined
        metadata: Seeds, parameters and counts that produced the artifacts

    """

    model_config = ConfigDict(frozen=True)

    layer_id: int
    target_label: int | None = None
    class_count: int = Field(ge=1)
    patterns: PatternSet = Field(default_factory=PatternSet)
    imp_pixels: ImportantPixels | None = None
    pc_patterns: PatternSet | None = None
    metadata: dict[str, Any] = Field(default_factory=dict)

    @property
    def threshold_percent(self) -> float | None:
        return self.imp_pixels.threshold_percent if self.imp_pixels is not None else None

    def monitor_config(
        self, mode: CorrectionMode, mask_value: float | tuple[float, ...] = 0.0, seed: int = 0
    ) -> MonitorConfig:
        """Monitor configuration over these artifacts.

        Raises:
            ValidationError: When the mode needs an artifact that is missing

        """
        if mode == "input_mask" and len(self.patterns) and self.imp_pixels is None:
            raise ValidationError("input_mask mode needs important pixels; run attribution first")
        return MonitorConfig(
            patterns=self.patterns,
            imp_pixels=self.imp_pixels if mode == "input_mask" else None,
            mask_value=mask_value,
            mode=mode,
            pc_patterns=self.pc_patterns,
            target_label=self.target_label,
            class_count=self.class_count,
            seed=seed,
        )
