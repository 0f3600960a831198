import numpy as np
import pytest

from poisonwatch.application.mining.tree import extract_patterns, learn_tree
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.domain.models.patterns import ActivationRow, Conjunct, TreeParams

LABELS = ("0_c", "1_c", "2_m", "0_m")


def row(values, label: str, sample_id: int = 0) -> ActivationRow:
    base = int(label.split("_")[0])
    return ActivationRow(
        sample_id=sample_id, neuron_values=values, renamed_label=label, ideal_label=base, predicted_label=base
    )


def random_rows(seed: int) -> list[ActivationRow]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 30))
    width = int(rng.integers(1, 4))
    # Small integer grids force duplicate values and impure leaves.
    values = rng.integers(0, 4, size=(n, width)).astype(np.float32)
    labels = rng.choice(LABELS[: int(rng.integers(1, 5))], size=n)
    return [row(v, str(label), i) for i, (v, label) in enumerate(zip(values, labels, strict=True))]


def test_midpoint_split():
    tree = learn_tree([row([0.0], "0_c"), row([1.0], "1_c", 1)])
    assert tree.root.neuron_index == 0
    assert tree.root.threshold == 0.5
    patterns = extract_patterns(tree)
    assert [(p.conjuncts, p.renamed_label, p.support) for p in patterns] == [
        ((Conjunct(neuron_index=0, op="<=", threshold=0.5),), "0_c", 1),
        ((Conjunct(neuron_index=0, op=">", threshold=0.5),), "1_c", 1),
    ]


def test_single_label_is_one_pure_leaf():
    tree = learn_tree([row([float(i)], "3_m", i) for i in range(5)])
    assert tree.root.is_leaf and tree.root.is_pure
    (pattern,) = extract_patterns(tree)
    assert pattern.conjuncts == ()
    assert pattern.support == 5
    assert pattern.matches(np.array([123.0]))


def test_identical_values_with_mixed_labels_stay_impure():
    tree = learn_tree([row([1.0], "0_c"), row([1.0], "1_c", 1)])
    assert tree.root.is_leaf and not tree.root.is_pure
    assert extract_patterns(tree) == []


def test_routing_reproduces_the_tree_prediction():
    for seed in range(1000):
        rows = random_rows(seed)
        tree = learn_tree(rows, TreeParams(min_leaf=1, max_depth=6))
        for r in rows:
            leaf = tree.route(r.neuron_values)
            assert leaf.majority_label == tree.predict(r.neuron_values)
            assert r.renamed_label in leaf.label_counts


def test_patterns_are_pure_and_partition_the_rows():
    for seed in range(200):
        rows = random_rows(seed)
        tree = learn_tree(rows)
        patterns = extract_patterns(tree)
        matrix = np.stack([r.neuron_values for r in rows])
        labels = np.array([r.renamed_label for r in rows])
        covered = np.zeros(len(rows), dtype=int)
        for pattern in patterns:
            hit = pattern.matches_rows(matrix)
            assert set(labels[hit]) == {pattern.renamed_label}
            assert hit.sum() == pattern.support
            covered += hit
        assert covered.max(initial=0) <= 1
        for i, r in enumerate(rows):
            leaf = tree.route(r.neuron_values)
            assert covered[i] == (1 if leaf.is_pure else 0)


def test_min_leaf_and_depth_limits():
    rows = [row([float(i)], LABELS[i % 2], i) for i in range(10)]
    stump = learn_tree(rows, TreeParams(max_depth=1))
    assert stump.root.left is not None and stump.root.left.is_leaf
    assert stump.root.right is not None and stump.root.right.is_leaf
    coarse = learn_tree(rows, TreeParams(min_leaf=5))
    for leaf, _ in coarse.leaves():
        assert leaf.size >= 5


def test_bad_rows():
    with pytest.raises(ValidationError):
        learn_tree([])
    with pytest.raises(ValidationError):
        learn_tree([row([0.0], "0_c"), row([0.0, 1.0], "1_c", 1)])
