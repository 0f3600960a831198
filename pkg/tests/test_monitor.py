import io
import json

import numpy as np
import pytest
from scipy import stats

from poisonwatch.application.monitor.runtime import (
    classify_with_defense,
    correct_input,
    defend_dataset,
    detect,
    guess_label,
    match,
)
from poisonwatch.application.monitor.stream import encode_frame, read_frames, serve
from poisonwatch.core.exceptions import ContainerFormatError, ValidationError
from poisonwatch.core.nn.engine import predict
from poisonwatch.core.rng import SplitMix64
from poisonwatch.domain.models.heatmaps import ImportantPixels
from poisonwatch.domain.models.monitor import MonitorConfig
from poisonwatch.domain.models.patterns import Conjunct, Pattern, PatternSet

from conftest import TRIGGER_PIXEL


def cond(index: int, op: str, threshold: float) -> Conjunct:
    return Conjunct(neuron_index=index, op=op, threshold=threshold)


def mis(*conjuncts: Conjunct, support: int = 1, label: int = 0) -> Pattern:
    return Pattern(layer_id=2, conjuncts=conjuncts, kind="mis", base_label=label, support=support)


TRIGGER_PATTERN = mis(cond(3, ">", 0.5), support=5)


def trigger_config(mode: str = "input_mask", **extra) -> MonitorConfig:
    return MonitorConfig(
        patterns=PatternSet(patterns=(TRIGGER_PATTERN,)),
        imp_pixels=ImportantPixels(pixels=((TRIGGER_PIXEL, 3),), threshold_percent=12.5, shape=(4, 4)),
        mode=mode,
        target_label=0,
        class_count=3,
        **extra,
    )


def test_match_boundaries():
    assert match(mis(), np.array([1.0, -5.0]))
    assert not match(mis(cond(0, ">", 0.5)), np.array([0.5]))
    assert match(mis(cond(0, "<=", 0.5)), np.array([0.5]))
    with pytest.raises(ValidationError):
        match(mis(cond(4, ">", 0.0)), np.zeros(2))


def test_match_agrees_with_brute_force(rng):
    for _ in range(10_000):
        width = int(rng.integers(1, 5))
        conjuncts = [
            cond(int(rng.integers(0, width)), str(rng.choice(["<=", ">"])), float(rng.integers(-2, 3)) / 2)
            for _ in range(int(rng.integers(0, 4)))
        ]
        values = (rng.integers(-2, 3, size=width) / 2).astype(np.float32)
        expected = all(
            (values[c.neuron_index] <= c.threshold) if c.op == "<=" else (values[c.neuron_index] > c.threshold)
            for c in conjuncts
        )
        assert match(mis(*conjuncts), values) == expected


def test_detect_first_match_wins():
    assert not detect(np.array([1.0]), PatternSet()).poisoned
    patterns = PatternSet(
        patterns=(mis(cond(0, ">", 0.0), support=5), mis(cond(0, "<=", 0.0), support=4), mis(support=3))
    )
    verdict = detect(np.array([1.0]), patterns)
    assert verdict.poisoned and verdict.matched_pattern_index == 0
    assert detect(np.array([-1.0]), patterns).matched_pattern_index == 1


def test_correct_input_copies():
    image = np.random.default_rng(0).uniform(size=(4, 4, 3)).astype(np.float32)
    before = image.copy()
    np.testing.assert_array_equal(correct_input(image, [], 0.0), image)
    assert not correct_input(image, list(range(16)), 0.0).any()
    masked = correct_input(image, [5], (0.1, 0.2, 0.3))
    np.testing.assert_allclose(masked[1, 1], [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(image, before)
    with pytest.raises(ValidationError):
        correct_input(image, [16], 0.0)
    with pytest.raises(ValidationError):
        correct_input(image, [0], (0.1, 0.2))


def test_empty_p_passes_labels_through(toy_model, toy_sets):
    for ds in toy_sets:
        results = defend_dataset(toy_model, ds, MonitorConfig(class_count=3))
        for result, sample in zip(results, ds.samples, strict=True):
            assert not result.verdict.poisoned
            assert result.original_label == result.final_label == predict(toy_model, sample.pixels)


def test_masking_repairs_the_triggered_input(toy_model, toy_sets):
    _, poisoned = toy_sets
    sample = poisoned.samples[0]
    before = sample.pixels.copy()
    result = classify_with_defense(toy_model, sample.pixels, trigger_config(), sample_id=sample.id)
    assert result.verdict.matched_pattern_index == 0
    assert result.original_label == 0
    assert result.final_label == sample.ideal_label
    changed = np.flatnonzero((result.corrected_image != sample.pixels).any(axis=2).reshape(-1))
    assert set(changed) <= {TRIGGER_PIXEL, 3} and TRIGGER_PIXEL in changed
    np.testing.assert_array_equal(sample.pixels, before)


def test_clean_inputs_are_untouched(toy_model, toy_sets):
    clean, _ = toy_sets
    for sample in clean.samples:
        result = classify_with_defense(toy_model, sample.pixels, trigger_config(), sample_id=sample.id)
        assert not result.verdict.poisoned and result.corrected_image is None


def test_batched_defense_matches_single_inputs(toy_model, toy_sets):
    for ds in toy_sets:
        for mode in ("input_mask", "label_guess"):
            cfg = trigger_config(mode, pc_patterns=PatternSet(), seed=3)
            batched = defend_dataset(toy_model, ds, cfg, threads=3)
            for result, sample in zip(batched, ds.samples, strict=True):
                single = classify_with_defense(toy_model, sample.pixels, cfg, sample_id=sample.id)
                assert result.as_record() == single.as_record()


def test_label_guess_is_deterministic(toy_model, toy_sets):
    _, poisoned = toy_sets
    cfg = trigger_config("label_guess", pc_patterns=PatternSet(), seed=11)
    image = poisoned.samples[0].pixels
    first = classify_with_defense(toy_model, image, cfg, sample_id=4)
    second = classify_with_defense(toy_model, image, cfg, sample_id=4)
    assert first == second
    assert first.final_label in (1, 2)


def test_guess_label_prefers_pc_match():
    pc = PatternSet(patterns=(Pattern(layer_id=2, conjuncts=(cond(0, ">", 0.5),), kind="correct", base_label=3, support=2),))
    assert guess_label(np.array([1.0]), pc, 0, SplitMix64(0), 4) == 3
    assert guess_label(np.array([0.0]), pc, 0, SplitMix64(0), 4) in (1, 2, 3)
    with pytest.raises(ValidationError):
        guess_label(np.array([0.0]), PatternSet(), 0, SplitMix64(0), 1)


def test_guess_fallback_is_uniform():
    rng = SplitMix64(2024)
    draws = [guess_label(np.array([0.0]), PatternSet(), 0, rng, 4) for _ in range(10_000)]
    counts = np.bincount(draws, minlength=4)
    assert counts[0] == 0
    assert stats.chisquare(counts[1:]).pvalue > 1e-3


def test_label_guess_needs_pc_patterns():
    with pytest.raises(ValidationError):
        trigger_config("label_guess")


def test_serve_answers_every_frame(toy_model, toy_sets):
    clean, poisoned = toy_sets
    images = [clean.samples[0].pixels, poisoned.samples[0].pixels]
    source = io.BytesIO(b"".join(encode_frame(image) for image in images))
    sink = io.StringIO()
    assert serve(toy_model, trigger_config(), source, sink) == 2
    records = [json.loads(line) for line in sink.getvalue().splitlines()]
    assert [r["verdict"] for r in records] == ["clean", "poisoned"]
    assert [r["id"] for r in records] == [0, 1]
    assert records[1]["final_label"] == poisoned.samples[0].ideal_label


def test_truncated_frames_are_rejected():
    frame = encode_frame(np.zeros((4, 4, 1), dtype=np.float32))
    with pytest.raises(ContainerFormatError):
        list(read_frames(io.BytesIO(frame[:-3]), (4, 4, 1)))
    with pytest.raises(ContainerFormatError):
        list(read_frames(io.BytesIO(frame), (2, 2, 1)))
