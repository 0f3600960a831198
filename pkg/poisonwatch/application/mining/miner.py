"""Offline mining of mis-classification and correct-classification patterns."""

import numpy as np

from poisonwatch.application.mining.tree import extract_patterns, learn_tree
from poisonwatch.core.exceptions import NoMisclassificationError, ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.nn.engine import class_scores, forward_batch
from poisonwatch.core.parallel import chunk_bounds, map_ordered
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.network import Model
from poisonwatch.domain.models.patterns import ActivationRow, Pattern, PatternSet, TreeParams, renamed_label

logger = LoggerManager.get_logger(__name__)


def layer_values_and_predictions(model: Model, images: np.ndarray, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Flagged-layer values (N, units) and predicted labels (N,) for a batch."""
    if not len(images):
        width = model.output_shapes[model.flagged_layer_id][0]
        return np.zeros((0, width), dtype=model.dtype), np.zeros(0, dtype=np.int64)

    def run(bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        outputs = forward_batch(model, images[bounds[0] : bounds[1]])
        return outputs[model.flagged_layer_id], class_scores(model, outputs).argmax(axis=1)

    parts = map_ordered(run, chunk_bounds(len(images)), threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def record_activations(model: Model, ds: Dataset, threads: int = 1) -> list[ActivationRow]:
    """One row per sample with the flagged dense layer's values.

    Correctly classified samples are labeled "<ideal>_c"; mis-classified ones
    "<predicted>_m".

    Raises:
        ShapeError: When the samples do not fit the model

    """
    values, predicted = layer_values_and_predictions(model, ds.images(), threads)
    rows = []
    for sample, row_values, label in zip(ds.samples, values, predicted, strict=True):
        kind = "correct" if label == sample.ideal_label else "mis"
        rows.append(
            ActivationRow(
                sample_id=sample.id,
                neuron_values=row_values,
                renamed_label=renamed_label(int(label), kind),
                ideal_label=sample.ideal_label,
                predicted_label=int(label),
            )
        )
    mis = sum(1 for r in rows if r.renamed_label.endswith("_m"))
    logger.info(f"Recorded {len(rows)} activation rows, {mis} mis-classified")
    return rows


def mine_patterns(model: Model, gen: Dataset, params: TreeParams | None = None, threads: int = 1) -> list[Pattern]:
    """Record GEN activations, learn one tree over the renamed labels, extract pure patterns."""
    rows = record_activations(model, gen, threads)
    logger.info(f"Mining patterns on {len(rows)} GEN rows")
    patterns = extract_patterns(learn_tree(rows, params, layer_id=model.flagged_layer_id))
    logger.info(f"Extracted {len(patterns)} pure patterns")
    return patterns


def infer_target_label(patterns: list[Pattern]) -> int:
    """Base label of the highest-support mis-classification pattern.

    Ties keep extraction order.

    Raises:
        NoMisclassificationError: When no mis pattern exists (the model may be clean)

    """
    mis = [p for p in patterns if p.kind == "mis"]
    if not mis:
        raise NoMisclassificationError("no mis-classification observed; the model may be clean")
    best = mis[0]
    for pattern in mis[1:]:
        if pattern.support > best.support:
            best = pattern
    return best.base_label


def select_P(patterns: list[Pattern], target: int) -> PatternSet:  # noqa: N802
    """Mis patterns toward target, by descending support."""
    return PatternSet.from_patterns([p for p in patterns if p.kind == "mis" and p.base_label == target])


def correct_rows(rows: list[ActivationRow]) -> list[ActivationRow]:
    """Relabel every row to "<ideal>_c", keeping its recorded values."""
    return [r.model_copy(update={"renamed_label": renamed_label(r.ideal_label, "correct")}) for r in rows]


def mine_correct_patterns(
    model: Model, gen: Dataset, params: TreeParams | None = None, threads: int = 1
) -> PatternSet:
    """Mine P_c: patterns over GEN with every sample labeled by its ideal class.

    Poisoned samples keep their triggered activations, so the resulting
    patterns map backdoor-looking values back to a plausible true class.

    Raises:
        ValidationError: When GEN is empty

    """
    if not len(gen):
        raise ValidationError("GEN is empty")
    if not any(s.poisoned for s in gen.samples):
        logger.warning("GEN has no poisoned samples; P_c reduces to correct-classification patterns")
    rows = correct_rows(record_activations(model, gen, threads))
    patterns = extract_patterns(learn_tree(rows, params, layer_id=model.flagged_layer_id))
    logger.info(f"Mined {len(patterns)} correct-label patterns")
    return PatternSet.from_patterns(patterns)
