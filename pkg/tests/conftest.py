"""Shared fixtures: tiny hand-built models and datasets with known behavior."""

import numpy as np
import pytest

from poisonwatch.application.forge.poisoning import build_poisoned_test
from poisonwatch.core.nn.init import he_initialize
from poisonwatch.domain.models.dataset import Dataset, ImageSample, PoisonSpec
from poisonwatch.domain.models.network import LayerSpec, Model

# Flat pixel that identifies each clean class of the toy images (4x4x1).
CLASS_PIXEL = {0: 2, 1: 0, 2: 1}
TRIGGER_PIXEL = 15
TOY_SHAPE = (4, 4, 1)


def dense_model(kernels: list[np.ndarray], input_shape: tuple[int, ...], flagged: int = 0) -> Model:
    """flatten -> dense -> relu -> dense ... with the given (units, in) kernels and zero biases."""
    layers: list[LayerSpec] = [LayerSpec(kind="flatten")]
    weights: list[tuple[np.ndarray, ...]] = [()]
    for index, kernel in enumerate(kernels):
        kernel = np.asarray(kernel, dtype=np.float32)
        layers.append(LayerSpec(kind="dense", units=kernel.shape[0], flagged=index == flagged))
        weights.append((kernel, np.zeros(kernel.shape[0], dtype=np.float32)))
        if index < len(kernels) - 1:
            layers.append(LayerSpec(kind="relu"))
            weights.append(())
    return Model(layers=tuple(layers), weights=tuple(weights), class_count=kernels[-1].shape[0], input_shape=input_shape)


def backdoored_toy_model() -> Model:
    """3-class model on 4x4x1 images whose bottom-right pixel forces class 0.

    Hidden units copy pixels 0, 1, 2 and the trigger pixel; class 0 scores
    pixel 2 plus three times the trigger.
    """
    hidden = np.zeros((4, 16), dtype=np.float32)
    for unit, pixel in enumerate((0, 1, 2, TRIGGER_PIXEL)):
        hidden[unit, pixel] = 1.0
    scores = np.array([[0, 0, 1, 3], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=np.float32)
    return dense_model([hidden, scores], TOY_SHAPE)


def toy_image(label: int, index: int) -> np.ndarray:
    pixels = np.zeros(16, dtype=np.float32)
    pixels[CLASS_PIXEL[label]] = 0.5 + 0.05 * (index % 5)
    return pixels.reshape(TOY_SHAPE)


def toy_clean_set(per_class: int = 8) -> Dataset:
    samples = []
    for sample_id in range(3 * per_class):
        label = sample_id % 3
        samples.append(ImageSample(pixels=toy_image(label, sample_id), ideal_label=label, id=sample_id))
    return Dataset(samples=tuple(samples), class_count=3)


TOY_TRIGGER = PoisonSpec(patch_height=1, patch_width=1, anchor="bottom-right", patch_color=1.0, target_label=0)


@pytest.fixture
def toy_model() -> Model:
    return backdoored_toy_model()


@pytest.fixture
def toy_sets() -> tuple[Dataset, Dataset]:
    """(clean test, poisoned test) for the toy model."""
    clean = toy_clean_set()
    return clean, build_poisoned_test(clean, TOY_TRIGGER)


@pytest.fixture
def tiny_cnn() -> Model:
    """Random float64 CNN for finite-difference checks."""
    layers = [
        LayerSpec(kind="conv2d", filters=2, kernel_size=3, padding=1),
        LayerSpec(kind="relu"),
        LayerSpec(kind="maxpool2d", kernel_size=2),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=5),
        LayerSpec(kind="relu"),
        LayerSpec(kind="dense", units=3),
    ]
    return he_initialize(layers, (6, 6, 2), 3, seed=11).astype(np.float64)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def build_dense():
    """Factory for hand-weighted dense models."""
    return dense_model
