"""Deterministic SGD training and model quality measures."""

import numpy as np
from pydantic import BaseModel, ConfigDict

from poisonwatch.core.exceptions import TrainingDivergedError, ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.nn.engine import backward_loss_batch, predict_batch
from poisonwatch.core.nn.init import he_initialize
from poisonwatch.core.parallel import map_batches
from poisonwatch.core.rng import derive_seed, numpy_generator
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.network import LayerSpec, Model
from poisonwatch.domain.models.training import ModelQuality, TrainConfig

logger = LoggerManager.get_logger(__name__)


class TrainingRun(BaseModel):
    """A trained model together with its per-epoch mean losses."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    model: Model
    epoch_losses: tuple[float, ...]


def fit(layers: list[LayerSpec], ds: Dataset, cfg: TrainConfig) -> TrainingRun:
    """Train a freshly initialized model on ds.train_labels with SGD + momentum.

    Args:
        layers: Layer specifications (the monitored dense layer is flagged automatically)
        ds: Training data; poisoned samples carry the target as train_label
        cfg: Hyperparameters

    Returns:
        The trained model and the loss history

    Raises:
        ValidationError: When the dataset is empty
        ShapeError: When the layers do not fit the dataset's images or classes
        TrainingDivergedError: When a batch loss becomes NaN or infinite

    """
    if ds.image_shape is None:
        raise ValidationError("cannot train on an empty dataset")
    model = he_initialize(layers, ds.image_shape, ds.class_count, cfg.seed)
    images = ds.images()
    targets = ds.train_labels()
    params = [[np.array(w) for w in layer_weights] for layer_weights in model.weights]
    velocity = [[np.zeros_like(w) for w in layer_weights] for layer_weights in params]

    losses: list[float] = []
    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            order = numpy_generator(derive_seed(cfg.seed, "shuffle", epoch)).permutation(len(images))
        else:
            order = np.arange(len(images))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            index = order[start : start + cfg.batch_size]
            loss, grads = backward_loss_batch(model, images[index], targets[index])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} at epoch {epoch}, batch {start // cfg.batch_size}; "
                    f"learning rate {cfg.learning_rate} is likely too high"
                )
            for layer_params, layer_velocity, layer_grads in zip(params, velocity, grads, strict=True):
                for p, v, g in zip(layer_params, layer_velocity, layer_grads, strict=True):
                    v *= cfg.momentum
                    v -= cfg.learning_rate * g
                    p += v
            model = model.with_weights(tuple(tuple(lp) for lp in params))
            total += loss * len(index)
        losses.append(total / len(order))
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: mean loss {losses[-1]:.4f}")
    return TrainingRun(model=model, epoch_losses=tuple(losses))


def train(layers: list[LayerSpec], ds: Dataset, cfg: TrainConfig) -> Model:
    """Train and return only the model."""
    return fit(layers, ds, cfg).model


def predict_dataset(model: Model, ds: Dataset, threads: int = 1) -> np.ndarray:
    """Predicted labels for every sample, in dataset order."""
    return map_batches(lambda batch: predict_batch(model, batch), ds.images(), threads)


def clean_accuracy(model: Model, clean_ds: Dataset, threads: int = 1) -> float:
    """Fraction of samples predicted as their ideal label."""
    if not len(clean_ds):
        raise ValidationError("clean accuracy needs a non-empty dataset")
    return float(np.mean(predict_dataset(model, clean_ds, threads) == clean_ds.ideal_labels()))


def attack_success_rate(model: Model, poisoned_ds: Dataset, target: int, threads: int = 1) -> float:
    """Fraction of triggered samples (ideal label != target) predicted as target."""
    if any(not s.poisoned for s in poisoned_ds.samples):
        raise ValidationError("attack success rate is measured on poisoned samples only")
    eligible = poisoned_ds.subset([s for s in poisoned_ds.samples if s.ideal_label != target])
    if not len(eligible):
        raise ValidationError(f"no poisoned sample has an ideal label other than {target}")
    return float(np.mean(predict_dataset(model, eligible, threads) == target))


def measure_quality(
    model: Model, clean_ds: Dataset, poisoned_ds: Dataset | None, target: int | None, threads: int = 1
) -> ModelQuality:
    """Clean accuracy, plus attack success rate when poisoned data and a target are given."""
    asr = None
    if poisoned_ds is not None and target is not None and len(poisoned_ds):
        asr = attack_success_rate(model, poisoned_ds, target, threads)
    return ModelQuality(clean_accuracy=clean_accuracy(model, clean_ds, threads), attack_success_rate=asr)
