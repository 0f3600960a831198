"""Experiment and pipeline configuration documents."""

import json
from pathlib import Path
from typing import Any, Literal, Self, TypeVar

import pydantic
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from poisonwatch.config.defense_settings import DefenseSettings
from poisonwatch.core.exceptions import ContainerFormatError, FileAccessError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.dataset import PoisonSpec
from poisonwatch.domain.models.evaluation import ExternalBaseline
from poisonwatch.domain.models.heatmaps import AttributionMethod
from poisonwatch.domain.models.monitor import CorrectionMode
from poisonwatch.domain.models.network import LayerSpec
from poisonwatch.domain.models.patterns import TreeParams
from poisonwatch.domain.models.training import TrainConfig

logger = LoggerManager.get_logger(__name__)

ThresholdPolicy = Literal["auto", "sweep"] | float
C = TypeVar("C", bound=BaseModel)


def _defaults() -> DefenseSettings:
    return DefenseSettings.get_instance()


class StripSettings(BaseModel):
    """STRIP baseline section of an experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    overlay_count: int = Field(default_factory=lambda: _defaults().strip_overlays, ge=1)
    blend: float = Field(default_factory=lambda: _defaults().strip_blend, gt=0.0, lt=1.0)
    fp_percentile: float = Field(default_factory=lambda: _defaults().strip_fp_percentile, ge=0.0, le=100.0)


class ExperimentSettings(BaseModel):
    """Hyperparameters of a repeated evaluation.

    Attributes:
        alpha: Share of the remaining poisoned test inputs placed in GEN
        tree: Decision-tree limits for pattern mining
        threshold: "auto" (tune on GEN), "sweep" (tune and also report fixed thresholds) or a percentage
        threshold_candidates: Percentages tried by auto tuning
        sweep_thresholds: Fixed percentages reported under the sweep policy
        modes: Correction modes evaluated with the same mined patterns
        method: Attribution method
        mask_value: Neutral value for masked pixels, one or per channel
        strip: STRIP baseline parameters
        repetitions: Number of seeded repetitions
        seed: Master seed
        poison_target: Injected target, when known, to check target inference
        external_baselines: Rates imported from other tools

    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.25, gt=0.0, le=1.0)
    tree: TreeParams = Field(
        default_factory=lambda: TreeParams(min_leaf=_defaults().min_leaf, max_depth=_defaults().max_depth)
    )
    threshold: ThresholdPolicy = "auto"
    threshold_candidates: list[float] = Field(default_factory=lambda: list(_defaults().threshold_candidates))
    sweep_thresholds: list[float] = Field(default_factory=lambda: [2.0, 5.0, 10.0])
    modes: list[CorrectionMode] = Field(default_factory=lambda: ["input_mask"])
    method: AttributionMethod = Field(default_factory=lambda: _defaults().attribution_method)
    mask_value: float | tuple[float, ...] = Field(default_factory=lambda: _defaults().mask_value)
    strip: StripSettings = Field(default_factory=StripSettings)
    repetitions: int = Field(default_factory=lambda: _defaults().repetitions, ge=1)
    seed: int = 0
    poison_target: int | None = Field(default=None, ge=0)
    external_baselines: list[ExternalBaseline] = Field(default_factory=list)

    @field_validator("threshold")
    @classmethod
    def validate_threshold(cls, value: ThresholdPolicy) -> ThresholdPolicy:
        if isinstance(value, float | int) and not 0.0 < value <= 100.0:
            raise ValueError(f"threshold must lie in (0, 100], got {value}")
        return value

    @field_validator("threshold_candidates", "sweep_thresholds")
    @classmethod
    def validate_percentages(cls, value: list[float]) -> list[float]:
        for candidate in value:
            if not 0.0 < candidate <= 100.0:
                raise ValueError(f"threshold out of range: {candidate}")
        return value

    @field_validator("modes")
    @classmethod
    def validate_modes(cls, value: list[CorrectionMode]) -> list[CorrectionMode]:
        if not value:
            raise ValueError("at least one correction mode is required")
        return list(dict.fromkeys(value))


def _resolve(value: Path | str, info: ValidationInfo) -> Path:
    path = Path(value)
    base = (info.context or {}).get("base_dir")
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    return path


def _read_document(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise FileAccessError("config file does not exist", context=str(path))
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerFormatError(f"unreadable config: {e}", context=str(path)) from e
    if not isinstance(document, dict):
        raise ContainerFormatError("config must be a JSON object", context=str(path))
    return document


class ExperimentConfig(ExperimentSettings):
    """Experiment over stored artifacts; relative paths resolve against the config file.

    Attributes:
        model: Model container
        clean_test: Clean test dataset
        poisoned_test: Triggered test dataset

    """

    model: Path
    clean_test: Path
    poisoned_test: Path

    @field_validator("model", "clean_test", "poisoned_test", mode="before")
    @classmethod
    def resolve_paths(cls, value: Path | str, info: ValidationInfo) -> Path:
        return _resolve(value, info)

    @classmethod
    def from_file(cls, path: Path | str) -> Self:
        """Load and validate a config document.

        Raises:
            FileAccessError: When the file is missing
            ContainerFormatError: When it is not valid JSON or does not validate

        """
        return _validate_document(cls, path)


class ForgeSettings(BaseModel):
    """Synthetic dataset section of a pipeline."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    classes: int = Field(default=4, ge=2)
    train_per_class: int = Field(default=500, ge=1)
    test_per_class: int = Field(default=100, ge=1)
    shape: tuple[int, int, int] = (16, 16, 3)


def default_layers() -> list[LayerSpec]:
    """Two conv and two dense layers; the first dense layer is monitored."""
    return [
        LayerSpec(kind="conv2d", filters=8, kernel_size=3, padding=1),
        LayerSpec(kind="relu"),
        LayerSpec(kind="maxpool2d", kernel_size=2),
        LayerSpec(kind="conv2d", filters=16, kernel_size=3, padding=1),
        LayerSpec(kind="relu"),
        LayerSpec(kind="maxpool2d", kernel_size=2),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=32, flagged=True),
        LayerSpec(kind="relu"),
        LayerSpec(kind="dense", units=4),
    ]


class PipelineConfig(ExperimentSettings):
    """Forge, poison, train and evaluate from one document.

    Attributes:
        workdir: Directory receiving every intermediate artifact, relative to the config file
        forge: Synthetic dataset parameters
        poison: Trigger and target
        poison_fraction: Share of the training set to poison
        train: Training hyperparameters (its seed is derived from the master seed)
        layers: Network architecture

    """

    workdir: Path = Field(default=Path("pipeline"), validate_default=True)
    forge: ForgeSettings = Field(default_factory=ForgeSettings)
    poison: PoisonSpec = Field(
        default_factory=lambda: PoisonSpec(patch_height=3, patch_width=3, anchor="bottom-right", target_label=0)
    )
    poison_fraction: float = Field(default=0.1, ge=0.0, le=1.0)
    train: TrainConfig = Field(default_factory=TrainConfig)
    layers: list[LayerSpec] = Field(default_factory=default_layers)

    @field_validator("workdir", mode="before")
    @classmethod
    def resolve_workdir(cls, value: Path | str, info: ValidationInfo) -> Path:
        return _resolve(value, info)

    @model_validator(mode="after")
    def validate_target(self) -> Self:
        if self.poison.target_label >= self.forge.classes:
            raise ValueError(f"poison target {self.poison.target_label} outside {self.forge.classes} classes")
        dense = [layer for layer in self.layers if layer.kind == "dense"]
        if not dense or dense[-1].units != self.forge.classes:
            raise ValueError(f"the last dense layer must have {self.forge.classes} units")
        return self

    @property
    def effective_poison_target(self) -> int:
        return self.poison_target if self.poison_target is not None else self.poison.target_label

    @classmethod
    def from_file(cls, path: Path | str) -> Self:
        """Load and validate a pipeline document."""
        return _validate_document(cls, path)


def _validate_document(cls: type[C], path: Path | str) -> C:
    document = _read_document(path)
    try:
        config = cls.model_validate(document, context={"base_dir": Path(path).resolve().parent})
    except pydantic.ValidationError as e:
        raise ContainerFormatError(f"invalid config: {e}", context=str(path)) from e
    logger.info(f"Loaded {cls.__name__} from {path}")
    return config
