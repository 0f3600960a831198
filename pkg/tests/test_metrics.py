import numpy as np
import pytest

from poisonwatch.application.evaluation.metrics import compute_metrics, count_outcomes, detection_rates
from poisonwatch.application.forge.poisoning import make_gen_val_split
from poisonwatch.application.monitor.runtime import defend_dataset
from poisonwatch.application.training.trainer import clean_accuracy
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.domain.models.dataset import Dataset, ImageSample, SplitSpec
from poisonwatch.domain.models.evaluation import Metrics
from poisonwatch.domain.models.monitor import DefenseResult, MonitorConfig, Verdict

CLEAN = Verdict(outcome="clean")
FLAGGED = Verdict(outcome="poisoned", matched_pattern_index=0)


def fixture_set() -> Dataset:
    samples = [ImageSample(pixels=np.zeros((2, 2, 1)), ideal_label=1, poisoned=True, id=i) for i in range(10)]
    samples += [ImageSample(pixels=np.zeros((2, 2, 1)), ideal_label=2, id=i) for i in range(10, 20)]
    return Dataset(samples=tuple(samples), class_count=3)


def fixture_results() -> list[DefenseResult]:
    results = []
    for i in range(10):
        if i < 8:
            # Eight detections, six of them repaired to the ideal label 1.
            results.append(DefenseResult(sample_id=i, original_label=0, final_label=1 if i < 6 else 0, verdict=FLAGGED))
        else:
            # Two misses; the bare model already gets sample 9 right.
            label = 1 if i == 9 else 0
            results.append(DefenseResult(sample_id=i, original_label=label, final_label=label, verdict=CLEAN))
    for i in range(10, 20):
        if i < 19:
            label = 2 if i < 17 else 0
            results.append(DefenseResult(sample_id=i, original_label=label, final_label=label, verdict=CLEAN))
        else:
            results.append(DefenseResult(sample_id=i, original_label=2, final_label=1, verdict=FLAGGED))
    return results


def test_hand_counted_fixture():
    counts = count_outcomes(fixture_results(), fixture_set())
    assert (counts.poisoned_detected, counts.poisoned_repaired) == (8, 7)
    assert (counts.clean_passed, counts.clean_repaired) == (9, 7)
    metrics = compute_metrics(fixture_results(), fixture_set())
    assert metrics.rates() == {
        "poisoned_detection_rate": 0.8,
        "poisoned_repair_rate": 0.7,
        "clean_detection_rate": 0.9,
        "clean_repair_rate": 0.7,
    }


def test_mean_identity(rng):
    blocks = [
        Metrics(
            poisoned_detection_rate=a, poisoned_repair_rate=b, clean_detection_rate=c, clean_repair_rate=d
        )
        for a, b, c, d in rng.uniform(size=(7, 4))
    ]
    mean = Metrics.mean(blocks)
    for name, value in mean.rates().items():
        assert abs(value - sum(getattr(m, name) for m in blocks) / len(blocks)) <= 1e-12
    assert Metrics.mean(blocks[:1]).rates() == blocks[0].rates()
    with pytest.raises(ValidationError):
        Metrics.mean([])


def test_always_clean_oracle():
    rates = detection_rates([CLEAN] * 20, fixture_set())
    assert rates.clean_detection_rate == 1.0
    assert rates.poisoned_detection_rate == 0.0
    assert rates.poisoned_repair_rate is None and rates.clean_repair_rate is None


def test_alignment_and_coverage_are_checked():
    results, truth = fixture_results(), fixture_set()
    with pytest.raises(ValidationError):
        compute_metrics(results[::-1], truth)
    with pytest.raises(ValidationError):
        compute_metrics(results[10:], truth.subset(list(truth.samples[10:])))


def test_disabled_defense_repairs_like_the_bare_model(toy_model, toy_sets):
    _, val = make_gen_val_split(*toy_sets, SplitSpec(alpha=0.5, seed=1))
    metrics = compute_metrics(defend_dataset(toy_model, val, MonitorConfig(class_count=3)), val)
    assert metrics.clean_repair_rate == clean_accuracy(toy_model, val.clean())
    assert metrics.poisoned_detection_rate == 0.0 and metrics.clean_detection_rate == 1.0
