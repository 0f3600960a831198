"""Activation rows, decision trees and neuron-value patterns."""

from typing import Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from poisonwatch.core.exceptions import ValidationError

PatternKind = Literal["correct", "mis"]
Operator = Literal["<=", ">"]

_KIND_SUFFIX: dict[str, str] = {"correct": "c", "mis": "m"}


def renamed_label(label: int, kind: PatternKind) -> str:
    """Token such as "7_m" (mis-classified to 7) or "3_c" (correctly classified as 3)."""
    return f"{label}_{_KIND_SUFFIX[kind]}"


def parse_renamed_label(token: str) -> tuple[int, PatternKind]:
    """Inverse of renamed_label."""
    label, _, suffix = token.rpartition("_")
    if suffix == "c":
        return int(label), "correct"
    if suffix == "m":
        return int(label), "mis"
    raise ValidationError(f"not a renamed label: {token!r}")


class ActivationRow(BaseModel):
    """Monitored-layer values of one sample with its renamed label.

    Attributes:
        sample_id: Id of the sample
        neuron_values: float32 values of the flagged dense layer
        renamed_label: "<label>_c" or "<label>_m"
        ideal_label: Ground-truth class
        predicted_label: Model prediction

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sample_id: int
    neuron_values: np.ndarray
    renamed_label: str
    ideal_label: int
    predicted_label: int

    @field_validator("neuron_values", mode="before")
    @classmethod
    def freeze_values(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float32).reshape(-1)
        array.setflags(write=False)
        return array

    @field_validator("renamed_label")
    @classmethod
    def validate_token(cls, value: str) -> str:
        parse_renamed_label(value)
        return value


class Conjunct(BaseModel):
    """One condition `value[neuron_index] op threshold`."""

    model_config = ConfigDict(frozen=True)

    neuron_index: int = Field(ge=0)
    op: Operator
    threshold: float

    @field_validator("threshold")
    @classmethod
    def as_float32(cls, value: float) -> float:
        """Thresholds are compared as stored 32-bit floats."""
        return float(np.float32(value))

    def holds(self, values: np.ndarray) -> bool:
        value = values[self.neuron_index]
        if self.op == "<=":
            return bool(value <= np.float32(self.threshold))
        return bool(value > np.float32(self.threshold))

    def as_list(self) -> list[Any]:
        return [self.neuron_index, self.op, self.threshold]


class Pattern(BaseModel):
    """A conjunction of neuron-value conditions implying a renamed label.

    Attributes:
        layer_id: Layer whose values the conditions read
        conjuncts: Root-to-leaf decisions (empty matches everything)
        kind: correct or mis
        base_label: Class the matching inputs are (mis)classified as
        support: Training rows in the leaf

    """

    model_config = ConfigDict(frozen=True)

    layer_id: int
    conjuncts: tuple[Conjunct, ...] = ()
    kind: PatternKind
    base_label: int = Field(ge=0)
    support: int = Field(ge=1)

    @property
    def renamed_label(self) -> str:
        return renamed_label(self.base_label, self.kind)

    @property
    def max_neuron_index(self) -> int:
        return max((c.neuron_index for c in self.conjuncts), default=-1)

    def matches(self, values: np.ndarray) -> bool:
        """True iff every conjunct holds.

        Raises:
            ValidationError: When a conjunct indexes past the vector

        """
        values = np.asarray(values, dtype=np.float32).reshape(-1)
        if self.max_neuron_index >= len(values):
            raise ValidationError(
                f"pattern reads neuron {self.max_neuron_index} of a {len(values)}-wide vector",
                context=f"layer {self.layer_id}",
            )
        return all(c.holds(values) for c in self.conjuncts)

    def matches_rows(self, matrix: np.ndarray) -> np.ndarray:
        """Vectorized match over the rows of an (N, width) matrix."""
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or self.max_neuron_index >= matrix.shape[1]:
            raise ValidationError(f"pattern reads neuron {self.max_neuron_index} of rows shaped {matrix.shape}")
        hit = np.ones(matrix.shape[0], dtype=bool)
        for c in self.conjuncts:
            column = matrix[:, c.neuron_index]
            hit &= column <= np.float32(c.threshold) if c.op == "<=" else column > np.float32(c.threshold)
        return hit


class PatternSet(BaseModel):
    """Patterns in descending support order.

    Equal supports keep extraction order, so index 0 is the highest-support
    pattern and the first match during a scan wins.
    """

    model_config = ConfigDict(frozen=True)

    patterns: tuple[Pattern, ...] = ()

    @model_validator(mode="after")
    def validate_order(self) -> Self:
        supports = [p.support for p in self.patterns]
        if any(a < b for a, b in zip(supports, supports[1:], strict=False)):
            raise ValidationError("patterns must be sorted by descending support")
        return self

    @classmethod
    def from_patterns(cls, patterns: list[Pattern]) -> "PatternSet":
        """Stable sort by descending support."""
        return cls(patterns=tuple(sorted(patterns, key=lambda p: -p.support)))

    def __len__(self) -> int:
        return len(self.patterns)

    def __getitem__(self, index: int) -> Pattern:
        return self.patterns[index]

    def first_match(self, values: np.ndarray) -> int | None:
        """Index of the first pattern matching values, None when none does."""
        for index, pattern in enumerate(self.patterns):
            if pattern.matches(values):
                return index
        return None


class TreeParams(BaseModel):
    """Growth limits of the decision tree."""

    model_config = ConfigDict(frozen=True)

    min_leaf: int = Field(default=1, ge=1)
    max_depth: int = Field(default=20, ge=0)


class TreeNode(BaseModel):
    """A CART node. Internal nodes send `value <= threshold` left."""

    model_config = ConfigDict(frozen=True)

    label_counts: dict[str, int]
    depth: int = 0
    neuron_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.neuron_index is None

    @property
    def is_pure(self) -> bool:
        return len(self.label_counts) == 1

    @property
    def size(self) -> int:
        return sum(self.label_counts.values())

    @property
    def majority_label(self) -> str:
        """Most frequent label; ties go to the smallest token."""
        return min(self.label_counts, key=lambda label: (-self.label_counts[label], label))


TreeNode.model_rebuild()


class DecisionTree(BaseModel):
    """A binary CART tree over one layer's neuron values."""

    model_config = ConfigDict(frozen=True)

    root: TreeNode
    layer_id: int
    width: int
    params: TreeParams = Field(default_factory=TreeParams)

    def route(self, values: np.ndarray) -> TreeNode:
        """Leaf reached by a value vector."""
        node = self.root
        while not node.is_leaf:
            assert node.neuron_index is not None and node.threshold is not None
            go_left = np.float32(values[node.neuron_index]) <= np.float32(node.threshold)
            next_node = node.left if go_left else node.right
            assert next_node is not None
            node = next_node
        return node

    def predict(self, values: np.ndarray) -> str:
        """Majority renamed label of the reached leaf."""
        return self.route(values).majority_label

    def leaves(self) -> list[tuple[TreeNode, tuple[Conjunct, ...]]]:
        """Leaves depth-first, left before right, with their root-to-leaf conditions."""
        found: list[tuple[TreeNode, tuple[Conjunct, ...]]] = []
        stack: list[tuple[TreeNode, tuple[Conjunct, ...]]] = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            if node.is_leaf:
                found.append((node, path))
                continue
            assert node.neuron_index is not None and node.threshold is not None
            assert node.left is not None and node.right is not None
            stack.append((node.right, (*path, Conjunct(neuron_index=node.neuron_index, op=">", threshold=node.threshold))))
            stack.append((node.left, (*path, Conjunct(neuron_index=node.neuron_index, op="<=", threshold=node.threshold))))
        return found
