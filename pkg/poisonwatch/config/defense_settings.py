"""Defaults for mining, attribution, run-time defense and the STRIP baseline."""

from typing import ClassVar, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.heatmaps import AttributionMethod

logger = LoggerManager.get_logger(__name__)


class DefenseSettings(BaseSettings):
    """Tunable defaults, overridable through DEFENSE_* environment variables.

    Attributes:
        min_leaf: Smallest number of rows a tree leaf may hold
        max_depth: Depth limit of the decision tree
        threshold_candidates: Percentages tried when tuning the pixel threshold
        fallback_threshold: Percentage used when GEN has no poisoned samples
        attribution_method: Default heatmap method
        mask_value: Neutral value written over masked pixels
        strip_overlays: Number of clean overlays per STRIP query
        strip_blend: Weight of the queried image in a STRIP blend
        strip_fp_percentile: Clean-entropy percentile used as STRIP threshold
        repetitions: Default number of experiment repetitions

    """

    _instance: ClassVar[Optional["DefenseSettings"]] = None

    min_leaf: int = Field(default=1, ge=1)
    max_depth: int = Field(default=20, ge=0)
    threshold_candidates: list[float] = Field(default_factory=lambda: [2.0, 5.0, 10.0, 25.0])
    fallback_threshold: float = Field(default=10.0, gt=0.0, le=100.0)
    attribution_method: AttributionMethod = Field(default="gradcam")
    mask_value: float = Field(default=0.0)
    strip_overlays: int = Field(default=16, ge=1)
    strip_blend: float = Field(default=0.5, gt=0.0, lt=1.0)
    strip_fp_percentile: float = Field(default=1.0, ge=0.0, le=100.0)
    repetitions: int = Field(default=10, ge=1)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_ignore_empty=True,
        extra="ignore",
        env_prefix="DEFENSE_",
    )

    @classmethod
    def get_instance(cls) -> "DefenseSettings":
        """Get the singleton instance of DefenseSettings."""
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @field_validator("threshold_candidates")
    @classmethod
    def validate_candidates(cls, value: list[float]) -> list[float]:
        """Candidates must be non-empty percentages in (0, 100]."""
        if not value:
            raise ValueError("threshold_candidates must not be empty")
        for candidate in value:
            if not 0.0 < candidate <= 100.0:
                raise ValueError(f"threshold candidate out of range: {candidate}")
        return value
