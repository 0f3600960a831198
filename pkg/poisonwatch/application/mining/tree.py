"""CART decision trees over neuron values and pure-leaf pattern extraction."""

import numpy as np

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.patterns import (
    ActivationRow,
    DecisionTree,
    Pattern,
    TreeNode,
    TreeParams,
    parse_renamed_label,
)

logger = LoggerManager.get_logger(__name__)


def _midpoint(low: np.float32, high: np.float32) -> float:
    """float32 midpoint that still separates low from high."""
    mid = np.float32((np.float64(low) + np.float64(high)) / 2.0)
    return float(low if mid >= high else mid)


class _TreeBuilder:
    """Grows one tree over a fixed value matrix and encoded label vector."""

    def __init__(self, values: np.ndarray, codes: np.ndarray, tokens: list[str], params: TreeParams) -> None:
        self.values = values
        self.codes = codes
        self.tokens = tokens
        self.params = params

    def _counts(self, index: np.ndarray) -> dict[str, int]:
        counts = np.bincount(self.codes[index], minlength=len(self.tokens))
        return {self.tokens[c]: int(n) for c, n in enumerate(counts) if n}

    def _best_split(self, index: np.ndarray) -> tuple[int, float] | None:
        """Split with the highest Gini gain; ties go to the lowest neuron, then threshold.

        Every candidate leaves at least min_leaf rows on both sides.
        """
        n = len(index)
        min_leaf = self.params.min_leaf
        onehot = np.eye(len(self.tokens), dtype=np.int64)[self.codes[index]]
        total = onehot.sum(axis=0)
        best: tuple[float, int, float] | None = None
        for neuron in range(self.values.shape[1]):
            column = self.values[index, neuron]
            order = np.argsort(column, kind="stable")
            ordered = column[order]
            left_counts = np.cumsum(onehot[order], axis=0)[:-1]
            left_size = np.arange(1, n)
            boundary = ordered[:-1] < ordered[1:]
            allowed = boundary & (left_size >= min_leaf) & (n - left_size >= min_leaf)
            if not allowed.any():
                continue
            right_counts = total - left_counts
            right_size = n - left_size
            # Sum of squared class shares weighted by child size; larger means lower impurity.
            score = (left_counts**2).sum(axis=1) / left_size + (right_counts**2).sum(axis=1) / right_size
            candidates = np.flatnonzero(allowed)
            top = candidates[score[candidates] == score[candidates].max()]
            thresholds = sorted(_midpoint(ordered[i], ordered[i + 1]) for i in top)
            candidate = (float(score[top[0]]), neuron, thresholds[0])
            if best is None or candidate[0] > best[0]:
                best = candidate
        if best is None:
            return None
        return best[1], best[2]

    def grow(self, index: np.ndarray, depth: int) -> TreeNode:
        counts = self._counts(index)
        if len(counts) <= 1 or depth >= self.params.max_depth:
            return TreeNode(label_counts=counts, depth=depth)
        split = self._best_split(index)
        if split is None:
            return TreeNode(label_counts=counts, depth=depth)
        neuron, threshold = split
        go_left = self.values[index, neuron] <= np.float32(threshold)
        return TreeNode(
            label_counts=counts,
            depth=depth,
            neuron_index=neuron,
            threshold=threshold,
            left=self.grow(index[go_left], depth + 1),
            right=self.grow(index[~go_left], depth + 1),
        )


def learn_tree(rows: list[ActivationRow], params: TreeParams | None = None, layer_id: int = 0) -> DecisionTree:
    """Learn a Gini CART tree over the renamed labels of activation rows.

    Candidate thresholds are float32 midpoints between consecutive distinct
    sorted values; rows with `value <= threshold` go left. Growth stops at
    pure nodes, at max_depth, or when no split keeps min_leaf rows per side.

    Args:
        rows: Activation rows, all of the same width
        params: Growth limits
        layer_id: Layer the values were read from

    Returns:
        The tree (a single leaf when fewer than two labels are present)

    Raises:
        ValidationError: When rows is empty or widths differ

    """
    if not rows:
        raise ValidationError("cannot learn a tree from zero rows")
    params = params or TreeParams()
    widths = {len(r.neuron_values) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"activation rows disagree on width: {sorted(widths)}")
    values = np.stack([r.neuron_values for r in rows]).astype(np.float32)
    tokens = sorted({r.renamed_label for r in rows})
    code_of = {token: code for code, token in enumerate(tokens)}
    codes = np.array([code_of[r.renamed_label] for r in rows], dtype=np.int64)

    logger.info(f"Learning tree over {len(rows)} rows, {values.shape[1]} neurons, {len(tokens)} labels")
    root = _TreeBuilder(values, codes, tokens, params).grow(np.arange(len(rows)), depth=0)
    return DecisionTree(root=root, layer_id=layer_id, width=values.shape[1], params=params)


def extract_patterns(tree: DecisionTree) -> list[Pattern]:
    """One pattern per pure leaf, in depth-first left-to-right leaf order.

    Conditions follow the root-to-leaf path: a left turn reads `<=`, a right
    turn `>`. Impure leaves yield nothing.
    """
    patterns = []
    for leaf, path in tree.leaves():
        if not leaf.is_pure or leaf.size == 0:
            continue
        (token,) = leaf.label_counts
        label, kind = parse_renamed_label(token)
        patterns.append(Pattern(layer_id=tree.layer_id, conjuncts=path, kind=kind, base_label=label, support=leaf.size))
    return patterns
