"""Summarized heatmaps and the normalize / delta / top-pixel algebra."""

import numpy as np

from poisonwatch.application.attribution.cam import attribution_maps_batch
from poisonwatch.application.mining.miner import layer_values_and_predictions
from poisonwatch.core.exceptions import EmptySupportError, ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.parallel import map_batches
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.heatmaps import (
    AttributionMethod,
    DeltaHeatmap,
    Heatmap,
    NormalizedHeatmap,
    pixel_budget,
)
from poisonwatch.domain.models.network import Model
from poisonwatch.domain.models.patterns import Pattern

logger = LoggerManager.get_logger(__name__)


def running_mean(maps: np.ndarray) -> np.ndarray:
    """Incremental float64 mean over the leading axis, in order."""
    mean = np.zeros(maps.shape[1:], dtype=np.float64)
    for count, current in enumerate(maps, start=1):
        mean += (current - mean) / count
    return mean


def _maps_for_class(
    model: Model, images: np.ndarray, class_index: int, method: AttributionMethod, threads: int
) -> np.ndarray:
    return map_batches(lambda batch: attribution_maps_batch(model, batch, class_index, method), images, threads)


def _id_order(ds: Dataset, members: np.ndarray) -> np.ndarray:
    """Positions of the selected members sorted by sample id."""
    positions = np.flatnonzero(members)
    ids = np.array([ds.samples[i].id for i in positions], dtype=np.int64)
    return positions[np.argsort(ids, kind="stable")]


def summarize_pattern_heatmaps(
    model: Model,
    gen: Dataset,
    patterns: list[Pattern],
    target: int,
    method: AttributionMethod = "gradcam",
    threads: int = 1,
) -> list[Heatmap]:
    """HM_p for every pattern: mean target-class map over the GEN inputs it matches.

    Maps are computed once per matched input and shared between patterns;
    means are accumulated in sample-id order.

    Raises:
        EmptySupportError: When a pattern matches no GEN input

    """
    images = gen.images()
    values, _ = layer_values_and_predictions(model, images, threads)
    memberships = [pattern.matches_rows(values) for pattern in patterns]
    for index, members in enumerate(memberships):
        if not members.any():
            raise EmptySupportError(f"pattern {index} matches no input of the provided data")
    if not memberships:
        return []

    needed = np.flatnonzero(np.logical_or.reduce(memberships))
    maps = np.zeros((len(gen), images.shape[1], images.shape[2]), dtype=np.float64)
    maps[needed] = _maps_for_class(model, images[needed], target, method, threads)

    heatmaps = []
    for members in memberships:
        order = _id_order(gen, members)
        heatmaps.append(Heatmap(values=running_mean(maps[order]), class_index=target, method=method, count=len(order)))
    logger.info(f"Summarized {len(heatmaps)} pattern heatmaps for class {target}")
    return heatmaps


def summarize_pattern_heatmap(
    model: Model, gen: Dataset, pattern: Pattern, target: int, method: AttributionMethod = "gradcam", threads: int = 1
) -> Heatmap:
    """HM_p of a single pattern."""
    return summarize_pattern_heatmaps(model, gen, [pattern], target, method, threads)[0]


def summarize_correct_heatmap(
    model: Model, gen: Dataset, method: AttributionMethod = "gradcam", threads: int = 1
) -> Heatmap:
    """HM_c: mean map of the predicted class over correctly classified GEN inputs.

    Raises:
        EmptySupportError: When no GEN input is classified correctly

    """
    images = gen.images()
    _, predicted = layer_values_and_predictions(model, images, threads)
    correct = predicted == gen.ideal_labels()
    if not correct.any():
        raise EmptySupportError("no input of the provided data is classified correctly")

    maps = np.zeros((len(gen), images.shape[1], images.shape[2]), dtype=np.float64)
    for label in np.unique(predicted[correct]):
        group = np.flatnonzero(correct & (predicted == label))
        maps[group] = _maps_for_class(model, images[group], int(label), method, threads)

    order = _id_order(gen, correct)
    # class_index of a mixed-class summary is the majority class among its members.
    majority = int(np.bincount(predicted[correct]).argmax())
    logger.info(f"Summarized correct-input heatmap over {len(order)} inputs")
    return Heatmap(values=running_mean(maps[order]), class_index=majority, method=method, count=len(order))


def normalize(hm: Heatmap) -> NormalizedHeatmap:
    """Divide by the total; an all-zero map stays zero and is flagged degenerate."""
    total = hm.values.sum()
    if total == 0.0:
        return NormalizedHeatmap(values=np.zeros_like(hm.values), degenerate=True)
    return NormalizedHeatmap(values=hm.values / total)


def delta(hm_p: NormalizedHeatmap, hm_c: NormalizedHeatmap) -> DeltaHeatmap:
    """Element-wise hm_p - hm_c.

    Raises:
        ValidationError: When the shapes differ

    """
    if hm_p.values.shape != hm_c.values.shape:
        raise ValidationError(f"cannot subtract heatmaps of shapes {hm_p.values.shape} and {hm_c.values.shape}")
    return DeltaHeatmap(values=hm_p.values - hm_c.values)


def top_pixels(delta_map: DeltaHeatmap, threshold_percent: float) -> list[int]:
    """Row-major indices of the largest threshold% delta values.

    Ordered by descending value; equal values keep the lower index first.

    Raises:
        ValidationError: When the threshold is outside (0, 100] or selects no pixel

    """
    if not 0.0 < threshold_percent <= 100.0:
        raise ValidationError(f"threshold must lie in (0, 100], got {threshold_percent}")
    flat = delta_map.values.reshape(-1)
    k = pixel_budget(threshold_percent, flat.size)
    if k == 0:
        raise ValidationError(f"threshold {threshold_percent}% selects no pixel of a {flat.size}-pixel map")
    return [int(i) for i in np.argsort(-flat, kind="stable")[:k]]
