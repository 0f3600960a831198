"""Training configuration and model quality."""

from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    """SGD-with-momentum hyperparameters.

    Attributes:
        epochs: Passes over the data (0 returns the initialization)
        batch_size: Samples per update
        learning_rate: Step size
        momentum: Velocity decay
        seed: Seed of the initialization and the shuffles
        shuffle: Reshuffle the samples every epoch

    """

    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=15, ge=0)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=0.05, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    seed: int = 0
    shuffle: bool = True


class ModelQuality(BaseModel):
    """Clean accuracy and attack success rate of a classifier."""

    model_config = ConfigDict(frozen=True)

    clean_accuracy: float = Field(ge=0.0, le=1.0)
    attack_success_rate: float | None = Field(default=None, ge=0.0, le=1.0)
