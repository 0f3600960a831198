import numpy as np
import pytest

from poisonwatch.application.mining.miner import (
    infer_target_label,
    mine_correct_patterns,
    mine_patterns,
    record_activations,
    select_P,
)
from poisonwatch.core.exceptions import NoMisclassificationError
from poisonwatch.core.nn.engine import forward
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.patterns import Pattern


def pattern(label: int, support: int, kind: str = "mis") -> Pattern:
    return Pattern(layer_id=1, kind=kind, base_label=label, support=support)


def merged(clean: Dataset, poisoned: Dataset) -> Dataset:
    return Dataset(samples=clean.samples + poisoned.samples, class_count=clean.class_count)


def test_rows_are_renamed_by_outcome(toy_model, toy_sets):
    clean, poisoned = toy_sets
    rows = record_activations(toy_model, merged(clean, poisoned))
    by_id = {r.sample_id: r for r in rows}
    assert all(by_id[s.id].renamed_label == f"{s.ideal_label}_c" for s in clean.samples)
    assert all(by_id[s.id].renamed_label == "0_m" for s in poisoned.samples)
    sample = poisoned.samples[0]
    _, trace = forward(toy_model, sample.pixels)
    np.testing.assert_array_equal(by_id[sample.id].neuron_values, trace[toy_model.flagged_layer_id])


def test_infer_target_label():
    assert infer_target_label([pattern(7, 40), pattern(2, 3), pattern(1, 90, "correct")]) == 7
    assert infer_target_label([pattern(4, 1)]) == 4
    # Equal supports keep extraction order.
    assert infer_target_label([pattern(5, 8), pattern(6, 8)]) == 5
    with pytest.raises(NoMisclassificationError):
        infer_target_label([pattern(1, 9, "correct")])


def test_select_p_filters_and_sorts():
    mined = [pattern(0, 10), pattern(0, 90), pattern(2, 99), pattern(0, 40), pattern(0, 70, "correct")]
    selected = select_P(mined, 0)
    assert [p.support for p in selected.patterns] == [90, 40, 10]
    assert all(p.kind == "mis" and p.base_label == 0 for p in selected.patterns)


def test_mining_finds_the_backdoor(toy_model, toy_sets):
    clean, poisoned = toy_sets
    gen = merged(clean, poisoned)
    mined = mine_patterns(toy_model, gen)
    target = infer_target_label(mined)
    assert target == 0
    patterns = select_P(mined, target)
    assert len(patterns) >= 1
    values = np.stack([r.neuron_values for r in record_activations(toy_model, poisoned)])
    hit = np.logical_or.reduce([p.matches_rows(values) for p in patterns.patterns])
    assert hit.all()
    clean_values = np.stack([r.neuron_values for r in record_activations(toy_model, clean)])
    assert not np.logical_or.reduce([p.matches_rows(clean_values) for p in patterns.patterns]).any()


def test_correct_patterns_name_the_ideal_label(toy_model, toy_sets):
    clean, poisoned = toy_sets
    pc = mine_correct_patterns(toy_model, merged(clean, poisoned))
    assert all(p.kind == "correct" for p in pc.patterns)
    for sample in poisoned.samples:
        _, trace = forward(toy_model, sample.pixels)
        index = pc.first_match(trace[toy_model.flagged_layer_id])
        assert index is not None
        assert pc[index].base_label == sample.ideal_label


def test_correct_patterns_without_poison_reduce_to_clean_patterns(toy_model, toy_sets):
    clean, _ = toy_sets
    pc = mine_correct_patterns(toy_model, clean)
    mined = mine_patterns(toy_model, clean)
    assert [(p.conjuncts, p.base_label) for p in pc.patterns] == [
        (p.conjuncts, p.base_label) for p in sorted(mined, key=lambda p: -p.support)
    ]
