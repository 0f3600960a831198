import math

import numpy as np
import pytest

from poisonwatch.application.evaluation.strip import (
    blend,
    calibrate_threshold,
    overlay_indices,
    shannon_entropy,
    strip_detect,
    strip_entropies,
    strip_entropy,
)
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.domain.models.dataset import Dataset, ImageSample
from poisonwatch.domain.models.evaluation import StripConfig
from poisonwatch.domain.models.network import LayerSpec, Model


def constant_model(bias: list[float]) -> Model:
    return Model(
        layers=(LayerSpec(kind="flatten"), LayerSpec(kind="dense", units=len(bias), flagged=True)),
        weights=((), (np.zeros((len(bias), 4), dtype=np.float32), np.array(bias, dtype=np.float32))),
        class_count=len(bias),
        input_shape=(2, 2, 1),
    )


def pool(n: int = 6) -> Dataset:
    rng = np.random.default_rng(5)
    samples = tuple(ImageSample(pixels=rng.uniform(size=(2, 2, 1)), ideal_label=0, id=i) for i in range(n))
    return Dataset(samples=samples, class_count=3)


def test_one_hot_model_has_zero_entropy():
    cfg = StripConfig(overlay_count=4, pool=pool(), seed=1)
    image = np.full((2, 2, 1), 0.5, dtype=np.float32)
    assert strip_entropy(constant_model([1000.0, 0.0, 0.0]), image, cfg) == pytest.approx(0.0, abs=1e-12)


def test_uniform_model_has_log2_k_entropy():
    cfg = StripConfig(overlay_count=10, pool=pool(), seed=1)
    image = np.zeros((2, 2, 1), dtype=np.float32)
    assert strip_entropy(constant_model([0.0, 0.0, 0.0]), image, cfg) == pytest.approx(math.log2(3), rel=1e-9)


def test_entropy_ignores_zero_probabilities():
    np.testing.assert_allclose(shannon_entropy(np.array([[1.0, 0.0], [0.5, 0.5]])), [0.0, 1.0])


def test_blend_is_clamped():
    out = blend(np.ones((2, 2, 1)), np.ones((3, 2, 2, 1)) * 2.0, 0.5)
    assert out.shape == (3, 2, 2, 1)
    assert out.max() == 1.0


def test_strip_detect_is_strict():
    assert strip_detect(0.0, 0.5).poisoned
    assert not strip_detect(0.5, 0.5).poisoned
    verdict = strip_detect(0.1, 0.5)
    assert verdict.source == "strip" and verdict.matched_pattern_index is None


def test_calibration_percentile():
    assert calibrate_threshold(np.arange(100.0), 1.0) == pytest.approx(0.99)
    with pytest.raises(ValidationError):
        calibrate_threshold(np.array([]))


def test_entropies_are_deterministic_across_threads(toy_model, toy_sets):
    clean, poisoned = toy_sets
    cfg = StripConfig(overlay_count=5, pool=clean, seed=42)
    single = strip_entropies(toy_model, poisoned, cfg, threads=1)
    many = strip_entropies(toy_model, poisoned, cfg, threads=4)
    assert single.tobytes() == many.tobytes()
    first = poisoned.samples[0]
    assert single[0] == strip_entropy(toy_model, first.pixels, cfg, sample_id=first.id)


def test_overlays_drawn_with_replacement_from_a_small_pool():
    cfg = StripConfig(overlay_count=20, pool=pool(3), seed=0)
    value = strip_entropy(constant_model([0.0, 0.0, 0.0]), np.zeros((2, 2, 1)), cfg)
    assert value == pytest.approx(math.log2(3), rel=1e-9)


def test_no_calibration_image_is_blended_with_itself():
    cfg = StripConfig(overlay_count=5, pool=pool(6), seed=9)
    for position, sample in enumerate(cfg.pool.samples):
        assert position not in overlay_indices(cfg, sample.id)
        assert len(set(overlay_indices(cfg, sample.id))) == 5


def test_small_pool_still_skips_the_query():
    cfg = StripConfig(overlay_count=20, pool=pool(3), seed=0)
    assert set(overlay_indices(cfg, 1)) <= {0, 2}
    assert set(overlay_indices(cfg, None)) <= {0, 1, 2}


def test_pool_holding_only_the_query_is_rejected():
    cfg = StripConfig(overlay_count=2, pool=pool(1), seed=0)
    with pytest.raises(ValidationError, match="no other image"):
        overlay_indices(cfg, 0)
