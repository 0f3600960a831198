"""Evaluation metrics, STRIP configuration and experiment reports."""

from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.training import ModelQuality

METRIC_NAMES = ("poisoned_detection_rate", "poisoned_repair_rate", "clean_detection_rate", "clean_repair_rate")


class MetricCounts(BaseModel):
    """Hand-countable numerators and denominators behind Metrics."""

    model_config = ConfigDict(frozen=True)

    poisoned_total: int = Field(ge=1)
    clean_total: int = Field(ge=1)
    poisoned_detected: int = Field(ge=0)
    poisoned_repaired: int = Field(ge=0)
    clean_passed: int = Field(ge=0)
    clean_repaired: int = Field(ge=0)

    @model_validator(mode="after")
    def validate_bounds(self) -> Self:
        if max(self.poisoned_detected, self.poisoned_repaired) > self.poisoned_total:
            raise ValidationError("poisoned numerators exceed the poisoned total")
        if max(self.clean_passed, self.clean_repaired) > self.clean_total:
            raise ValidationError("clean numerators exceed the clean total")
        return self


class Metrics(BaseModel):
    """The four evaluation rates over a VAL set."""

    model_config = ConfigDict(frozen=True)

    poisoned_detection_rate: float = Field(ge=0.0, le=1.0)
    poisoned_repair_rate: float = Field(ge=0.0, le=1.0)
    clean_detection_rate: float = Field(ge=0.0, le=1.0)
    clean_repair_rate: float = Field(ge=0.0, le=1.0)
    counts: MetricCounts | None = None

    @classmethod
    def from_counts(cls, counts: MetricCounts) -> "Metrics":
        return cls(
            poisoned_detection_rate=counts.poisoned_detected / counts.poisoned_total,
            poisoned_repair_rate=counts.poisoned_repaired / counts.poisoned_total,
            clean_detection_rate=counts.clean_passed / counts.clean_total,
            clean_repair_rate=counts.clean_repaired / counts.clean_total,
            counts=counts,
        )

    @classmethod
    def mean(cls, items: list["Metrics"]) -> "Metrics":
        """Arithmetic mean of each rate.

        Raises:
            ValidationError: When items is empty

        """
        if not items:
            raise ValidationError("cannot average zero metric blocks")
        return cls(**{name: sum(getattr(m, name) for m in items) / len(items) for name in METRIC_NAMES})

    def rates(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


class DetectionRates(BaseModel):
    """Rates of a detector without repair (STRIP, imported tools).

    Repair rates are None where the tool does not repair.
    """

    model_config = ConfigDict(frozen=True)

    poisoned_detection_rate: float | None = Field(default=None, ge=0.0, le=1.0)
    poisoned_repair_rate: float | None = Field(default=None, ge=0.0, le=1.0)
    clean_detection_rate: float | None = Field(default=None, ge=0.0, le=1.0)
    clean_repair_rate: float | None = Field(default=None, ge=0.0, le=1.0)

    @classmethod
    def mean(cls, items: list["DetectionRates"]) -> "DetectionRates":
        """Mean of every rate that is present in all items."""
        values: dict[str, float | None] = {}
        for name in METRIC_NAMES:
            column = [getattr(item, name) for item in items]
            values[name] = None if not column or None in column else sum(column) / len(column)
        return cls(**values)


class ExternalBaseline(BaseModel):
    """Rates imported from another tool for side-by-side reporting."""

    model_config = ConfigDict(frozen=True)

    name: str
    rates: DetectionRates = Field(default_factory=DetectionRates)


class StripConfig(BaseModel):
    """STRIP entropy baseline parameters.

    Attributes:
        overlay_count: Clean overlays blended with each query
        blend: Weight of the query image in each blend
        entropy_threshold: Inputs with lower mean entropy are flagged
        pool: Clean images the overlays are drawn from
        seed: Seed of the overlay picks

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    overlay_count: int = Field(default=16, ge=1)
    blend: float = Field(default=0.5, gt=0.0, lt=1.0)
    entropy_threshold: float = 0.0
    pool: Dataset
    seed: int = 0

    @model_validator(mode="after")
    def validate_pool(self) -> Self:
        if not len(self.pool):
            raise ValidationError("the STRIP overlay pool is empty")
        return self


class RepetitionResult(BaseModel):
    """Outcome of one seeded repetition.

    Attributes:
        index: Repetition number
        seed: Seed derived for this repetition
        status: ok, or failed with error set
        error: Failure message of an aborted repetition
        inferred_target: Target label inferred from the mined patterns
        target_matches: Whether it equals the configured poison target
        pattern_count: |P|
        pc_pattern_count: |P_c| when label guessing ran
        threshold_percent: Pixel threshold used for masking
        metrics: Metrics per correction mode
        sweep: input_mask metrics per fixed threshold (sweep policy only)
        strip: STRIP rates on the same VAL set
        timings: Wall-clock seconds per stage (kept out of the main report)

    """

    model_config = ConfigDict(frozen=True)

    index: int
    seed: int
    status: Literal["ok", "failed"] = "ok"
    error: str | None = None
    inferred_target: int | None = None
    target_matches: bool | None = None
    pattern_count: int = 0
    pc_pattern_count: int | None = None
    threshold_percent: float | None = None
    metrics: dict[str, Metrics] = Field(default_factory=dict)
    sweep: dict[str, Metrics] = Field(default_factory=dict)
    strip: DetectionRates | None = None
    timings: dict[str, float] = Field(default_factory=dict, exclude=True)


class ExperimentReport(BaseModel):
    """Per-repetition and mean results of an experiment.

    Attributes:
        config: The experiment configuration as run
        master_seed: Seed every repetition seed is derived from
        repetition_count: Number of repetitions attempted
        quality: Clean accuracy and attack success rate of the model
        repetitions: Results in repetition order
        mean: Mean metrics per correction mode over successful repetitions
        mean_sweep: Mean metrics per fixed threshold
        strip_mean: Mean STRIP rates
        baselines: Imported external rows

    """

    model_config = ConfigDict(frozen=True)

    config: dict[str, Any] = Field(default_factory=dict)
    master_seed: int
    repetition_count: int = Field(ge=0)
    quality: ModelQuality | None = None
    repetitions: tuple[RepetitionResult, ...] = ()
    mean: dict[str, Metrics] = Field(default_factory=dict)
    mean_sweep: dict[str, Metrics] = Field(default_factory=dict)
    strip_mean: DetectionRates | None = None
    baselines: tuple[ExternalBaseline, ...] = ()

    @model_validator(mode="after")
    def validate_count(self) -> Self:
        if len(self.repetitions) != self.repetition_count:
            raise ValidationError(f"{len(self.repetitions)} repetitions recorded, {self.repetition_count} declared")
        return self

    @property
    def successful(self) -> list[RepetitionResult]:
        return [r for r in self.repetitions if r.status == "ok"]
