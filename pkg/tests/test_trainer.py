import numpy as np
import pytest

from poisonwatch.application.training.trainer import (
    attack_success_rate,
    clean_accuracy,
    fit,
    measure_quality,
    predict_dataset,
)
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.nn.init import he_initialize
from poisonwatch.domain.models.dataset import Dataset, ImageSample
from poisonwatch.domain.models.network import LayerSpec
from poisonwatch.domain.models.training import TrainConfig

LINEAR = [LayerSpec(kind="flatten"), LayerSpec(kind="dense", units=2)]


def separable_set(n: int = 40) -> Dataset:
    rng = np.random.default_rng(0)
    samples = []
    for i in range(n):
        label = i % 2
        pixels = rng.uniform(0.0, 0.3, size=(1, 2, 1))
        pixels[0, label, 0] += 0.7
        samples.append(ImageSample(pixels=pixels, ideal_label=label, id=i))
    return Dataset(samples=tuple(samples), class_count=2)


def labeled(labels: list[int], poisoned: bool = False) -> Dataset:
    samples = tuple(
        ImageSample(pixels=np.zeros((1, 2, 1)), ideal_label=label, poisoned=poisoned, id=i)
        for i, label in enumerate(labels)
    )
    return Dataset(samples=samples, class_count=3)


def test_separable_set_is_learned():
    ds = separable_set()
    run = fit(LINEAR, ds, TrainConfig(epochs=50, batch_size=8, learning_rate=0.5, seed=1))
    assert clean_accuracy(run.model, ds) == 1.0
    assert len(run.epoch_losses) == 50
    assert run.epoch_losses[-1] < run.epoch_losses[0]


def test_zero_epochs_returns_initialization():
    ds = separable_set()
    model = fit(LINEAR, ds, TrainConfig(epochs=0, seed=4)).model
    initial = he_initialize(LINEAR, (1, 2, 1), 2, seed=4)
    for a, b in zip(model.weights, initial.weights, strict=True):
        for x, y in zip(a, b, strict=True):
            np.testing.assert_array_equal(x, y)


def test_training_is_deterministic():
    ds = separable_set()
    cfg = TrainConfig(epochs=3, batch_size=5, seed=2)
    first, second = fit(LINEAR, ds, cfg), fit(LINEAR, ds, cfg)
    assert first.epoch_losses == second.epoch_losses
    for a, b in zip(first.model.weights, second.model.weights, strict=True):
        for x, y in zip(a, b, strict=True):
            assert x.tobytes() == y.tobytes()


def test_empty_training_set():
    with pytest.raises(ValidationError):
        fit(LINEAR, Dataset(samples=(), class_count=2), TrainConfig())


def test_constant_model_rates(build_dense):
    # Zero weights tie every class, so the model always answers 0.
    model = build_dense([np.zeros((3, 2))], (1, 2, 1))
    np.testing.assert_array_equal(predict_dataset(model, labeled([0, 1, 2]), threads=2), [0, 0, 0])
    assert clean_accuracy(model, labeled([0, 0, 0])) == 1.0
    assert clean_accuracy(model, labeled([1, 2, 1])) == 0.0
    triggered = labeled([1, 2, 2], poisoned=True)
    assert attack_success_rate(model, triggered, 0) == 1.0
    assert attack_success_rate(model, labeled([0, 2, 2], poisoned=True), 1) == 0.0


def test_attack_success_rate_preconditions(build_dense):
    model = build_dense([np.zeros((3, 2))], (1, 2, 1))
    with pytest.raises(ValidationError):
        attack_success_rate(model, labeled([1, 2]), 0)
    with pytest.raises(ValidationError):
        attack_success_rate(model, labeled([0, 0], poisoned=True), 0)


def test_measure_quality_without_poisoned_data(build_dense):
    model = build_dense([np.zeros((3, 2))], (1, 2, 1))
    quality = measure_quality(model, labeled([0, 1]), None, None)
    assert quality.clean_accuracy == 0.5
    assert quality.attack_success_rate is None
