import numpy as np
import pytest

from poisonwatch.application.attribution.cam import attribution_map, attribution_maps_batch
from poisonwatch.application.attribution.heatmaps import (
    delta,
    normalize,
    running_mean,
    summarize_correct_heatmap,
    summarize_pattern_heatmap,
    top_pixels,
)
from poisonwatch.application.attribution.localizer import important_pixels, localize, tune_threshold
from poisonwatch.application.mining.miner import infer_target_label, mine_patterns, select_P
from poisonwatch.core.exceptions import EmptySupportError, ValidationError
from poisonwatch.core.nn.init import he_initialize
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.heatmaps import DeltaHeatmap, Heatmap, NormalizedHeatmap
from poisonwatch.domain.models.network import LayerSpec, Model
from poisonwatch.domain.models.patterns import Conjunct, Pattern, PatternSet

from conftest import TRIGGER_PIXEL


def sort_oracle(values: np.ndarray, k: int) -> list[int]:
    flat = values.reshape(-1)
    return sorted(range(flat.size), key=lambda i: (-flat[i], i))[:k]


def unit_map(rng: np.random.Generator, shape=(4, 5)) -> NormalizedHeatmap:
    values = rng.uniform(size=shape)
    return NormalizedHeatmap(values=values / values.sum())


def toy_gen(clean: Dataset, poisoned: Dataset) -> Dataset:
    return Dataset(samples=clean.samples + poisoned.samples, class_count=clean.class_count)


def test_normalize():
    np.testing.assert_allclose(normalize(Heatmap(values=[[1.0, 3.0]], class_index=0)).values, [[0.25, 0.75]])
    uniform = normalize(Heatmap(values=np.ones((3, 4)), class_index=0))
    np.testing.assert_allclose(uniform.values, np.full((3, 4), 1 / 12))
    zero = normalize(Heatmap(values=np.zeros((2, 2)), class_index=0))
    assert zero.degenerate and not zero.values.any()


def test_normalized_maps_sum_to_one(rng):
    for _ in range(100):
        hm = Heatmap(values=rng.uniform(size=(6, 6)) * rng.uniform(0.01, 100), class_index=1)
        assert abs(normalize(hm).values.sum() - 1.0) <= 1e-6


def test_delta_algebra(rng):
    a = NormalizedHeatmap(values=[[1.0, 0.0]])
    b = NormalizedHeatmap(values=[[0.0, 1.0]])
    np.testing.assert_array_equal(delta(a, b).values, [[1.0, -1.0]])
    assert not delta(a, a).values.any()
    for _ in range(100):
        p, c = unit_map(rng), unit_map(rng)
        np.testing.assert_array_equal(delta(p, c).values, -delta(c, p).values)
        assert abs(delta(p, c).values.sum()) < 1e-9
    with pytest.raises(ValidationError):
        delta(a, NormalizedHeatmap(values=[[1.0]]))


def test_top_pixels_examples():
    small = DeltaHeatmap(values=[[0.1, 0.4], [0.2, 0.3]])
    assert top_pixels(small, 25.0) == [1]
    assert top_pixels(small, 100.0) == [1, 3, 2, 0]
    with pytest.raises(ValidationError):
        top_pixels(small, 0.0)
    with pytest.raises(ValidationError):
        top_pixels(small, 10.0)


def test_top_pixels_matches_sort_oracle(rng):
    for _ in range(1000):
        shape = tuple(int(d) for d in rng.integers(1, 9, size=2))
        # Rounded values produce ties, which must keep the lower index first.
        values = np.round(rng.normal(size=shape), 1)
        threshold = float(rng.choice([10.0, 25.0, 50.0, 100.0]))
        k = int(np.floor(threshold / 100.0 * values.size + 0.5 + 1e-9))
        if k == 0:
            continue
        assert top_pixels(DeltaHeatmap(values=values), threshold) == sort_oracle(values, k)


def test_running_mean_matches_two_pass(rng):
    maps = rng.uniform(size=(50, 7, 7))
    np.testing.assert_allclose(running_mean(maps), maps.mean(axis=0), atol=1e-6)


def test_zero_downstream_weights_give_zero_heatmap():
    layers = [
        LayerSpec(kind="conv2d", filters=2, kernel_size=3, padding=1),
        LayerSpec(kind="relu"),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=3),
    ]
    model = he_initialize(layers, (5, 5, 1), 3, seed=0)
    weights = list(model.weights)
    weights[3] = (np.zeros_like(weights[3][0]), np.zeros_like(weights[3][1]))
    silent = model.with_weights(tuple(weights))
    image = np.random.default_rng(0).uniform(size=(5, 5, 1))
    for method in ("gradcam", "gradcam++"):
        assert not attribution_map(silent, image, 1, method).values.any()


def test_identity_conv_heatmap_follows_the_input():
    model = Model.create(
        [LayerSpec(kind="conv2d", filters=1, kernel_size=1), LayerSpec(kind="flatten"), LayerSpec(kind="dense", units=2)],
        [
            (np.ones((1, 1, 1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32)),
            (),
            (np.ones((2, 9), dtype=np.float32), np.zeros(2, dtype=np.float32)),
        ],
        2,
        (3, 3, 1),
    )
    image = np.random.default_rng(1).uniform(size=(3, 3, 1)).astype(np.float32)
    hm = attribution_map(model, image, 0, "gradcam")
    np.testing.assert_allclose(hm.values, image[..., 0], rtol=1e-6)


def test_attribution_needs_conv_for_cam(toy_model):
    with pytest.raises(ValidationError):
        attribution_maps_batch(toy_model, np.zeros((1, 4, 4, 1)), 0, "gradcam")


def test_singleton_and_duplicate_pattern_heatmaps(toy_model, toy_sets):
    _, poisoned = toy_sets
    everything = Pattern(layer_id=toy_model.flagged_layer_id, kind="mis", base_label=0, support=1)
    single = poisoned.subset([poisoned.samples[0]])
    expected = attribution_map(toy_model, poisoned.samples[0].pixels, 0, "input-gradient").values
    hm = summarize_pattern_heatmap(toy_model, single, everything, 0, "input-gradient")
    np.testing.assert_allclose(hm.values, expected)
    assert hm.count == 1
    twin = poisoned.samples[0].model_copy(update={"id": 999})
    doubled = summarize_pattern_heatmap(
        toy_model, poisoned.subset([poisoned.samples[0], twin]), everything, 0, "input-gradient"
    )
    np.testing.assert_allclose(doubled.values, expected)


def test_pattern_without_support(toy_model, toy_sets):
    clean, _ = toy_sets
    never = Pattern(
        layer_id=toy_model.flagged_layer_id,
        conjuncts=(Conjunct(neuron_index=3, op=">", threshold=5.0),),
        kind="mis",
        base_label=0,
        support=1,
    )
    with pytest.raises(EmptySupportError):
        summarize_pattern_heatmap(toy_model, clean, never, 0, "input-gradient")


def test_correct_heatmap_two_pass(toy_model, toy_sets):
    clean, _ = toy_sets
    hm = summarize_correct_heatmap(toy_model, clean, "input-gradient")
    maps = np.stack(
        [attribution_map(toy_model, s.pixels, s.ideal_label, "input-gradient").values for s in clean.samples]
    )
    np.testing.assert_allclose(hm.values, maps.mean(axis=0), atol=1e-6)
    assert hm.count == len(clean)


def test_localization_points_at_the_trigger(toy_model, toy_sets):
    gen = toy_gen(*toy_sets)
    mined = mine_patterns(toy_model, gen)
    patterns = select_P(mined, infer_target_label(mined))
    localization = localize(toy_model, gen, patterns, 0, "input-gradient")
    assert len(localization.deltas) == len(patterns)
    for d in localization.deltas:
        assert int(np.argmax(d.values)) == TRIGGER_PIXEL
    selection = important_pixels(localization, 10.0)
    assert all(len(pix) == 2 and pix[0] == TRIGGER_PIXEL for pix in selection.pixels)


def test_tune_threshold(toy_model, toy_sets):
    gen = toy_gen(*toy_sets)
    mined = mine_patterns(toy_model, gen)
    patterns = select_P(mined, 0)
    localization = localize(toy_model, gen, patterns, 0, "input-gradient")
    assert tune_threshold(toy_model, gen, patterns, [50.0], localization=localization) == 50.0
    # Masking every pixel erases the class evidence, masking a quarter removes only the trigger.
    assert tune_threshold(toy_model, gen, patterns, [100.0, 25.0], localization=localization) == 25.0
    # 2% of 16 pixels selects nothing and is skipped.
    assert tune_threshold(toy_model, gen, patterns, [2.0, 25.0], localization=localization) == 25.0
    with pytest.raises(ValidationError):
        tune_threshold(toy_model, gen, patterns, [], localization=localization)


def test_empty_p_localizes_nothing(toy_model, toy_sets):
    clean, _ = toy_sets
    localization = localize(toy_model, clean, PatternSet(), 0, "input-gradient")
    assert localization.deltas == () and localization.correct_heatmap is None
