"""Trigger localization: per-pattern difference heatmaps and important pixels."""

import numpy as np
from pydantic import BaseModel, ConfigDict

from poisonwatch.application.attribution.heatmaps import (
    delta,
    normalize,
    summarize_correct_heatmap,
    summarize_pattern_heatmaps,
    top_pixels,
)
from poisonwatch.application.monitor.runtime import defend_dataset
from poisonwatch.config.defense_settings import DefenseSettings
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.heatmaps import AttributionMethod, DeltaHeatmap, Heatmap, ImportantPixels, pixel_budget
from poisonwatch.domain.models.monitor import MonitorConfig
from poisonwatch.domain.models.network import Model
from poisonwatch.domain.models.patterns import PatternSet

logger = LoggerManager.get_logger(__name__)


class Localization(BaseModel):
    """Summarized and difference heatmaps for every pattern of P.

    Attributes:
        pattern_heatmaps: HM_p, aligned with P
        correct_heatmap: HM_c, absent when P is empty
        deltas: normalized HM_p minus normalized HM_c, aligned with P
        shape: (H, W) of the maps

    """

    model_config = ConfigDict(frozen=True)

    pattern_heatmaps: tuple[Heatmap, ...] = ()
    correct_heatmap: Heatmap | None = None
    deltas: tuple[DeltaHeatmap, ...] = ()
    shape: tuple[int, int]


def localize(
    model: Model,
    gen: Dataset,
    patterns: PatternSet,
    target: int,
    method: AttributionMethod = "gradcam",
    threads: int = 1,
) -> Localization:
    """Compute HM_p, HM_c and the per-pattern deltas over GEN."""
    if gen.image_shape is None:
        raise ValidationError("GEN is empty")
    shape = (gen.image_shape[0], gen.image_shape[1])
    if not len(patterns):
        logger.warning("P is empty; nothing to localize")
        return Localization(shape=shape)
    pattern_maps = summarize_pattern_heatmaps(model, gen, list(patterns.patterns), target, method, threads)
    correct_map = summarize_correct_heatmap(model, gen, method, threads)
    hm_c = normalize(correct_map)
    deltas = tuple(delta(normalize(hm), hm_c) for hm in pattern_maps)
    return Localization(
        pattern_heatmaps=tuple(pattern_maps), correct_heatmap=correct_map, deltas=deltas, shape=shape
    )


def important_pixels(localization: Localization, threshold_percent: float) -> ImportantPixels:
    """pix_p for every pattern at one threshold, aligned with P."""
    return ImportantPixels(
        pixels=tuple(tuple(top_pixels(d, threshold_percent)) for d in localization.deltas),
        threshold_percent=threshold_percent,
        shape=localization.shape,
    )


def sweep_thresholds(
    model: Model,
    gen: Dataset,
    patterns: PatternSet,
    localization: Localization,
    candidates: list[float],
    mask_value: float | tuple[float, ...] = 0.0,
    threads: int = 1,
) -> dict[float, float]:
    """GEN poisoned repair rate of each candidate threshold (empty when GEN has no poisoned input)."""
    poisoned = gen.poisoned()
    if not len(poisoned):
        return {}
    ideal = poisoned.ideal_labels()
    rates: dict[float, float] = {}
    for candidate in sorted(candidates):
        cfg = MonitorConfig(
            patterns=patterns,
            imp_pixels=important_pixels(localization, candidate),
            mask_value=mask_value,
            mode="input_mask",
            class_count=model.class_count,
        )
        final = np.array([r.final_label for r in defend_dataset(model, poisoned, cfg, threads)])
        rates[candidate] = float(np.mean(final == ideal))
        logger.info(f"Threshold {candidate}%: GEN poisoned repair {rates[candidate]:.4f}")
    return rates


def tune_threshold(
    model: Model,
    gen: Dataset,
    patterns: PatternSet,
    candidates: list[float] | None = None,
    *,
    localization: Localization | None = None,
    target: int | None = None,
    method: AttributionMethod = "gradcam",
    mask_value: float | tuple[float, ...] = 0.0,
    threads: int = 1,
) -> float:
    """Candidate threshold with the best GEN poisoned repair rate; ties go to the smaller one.

    Falls back to the configured default (10%) with a warning when GEN holds
    no poisoned input.

    Raises:
        ValidationError: When candidates is empty

    """
    settings = DefenseSettings.get_instance()
    candidates = list(settings.threshold_candidates if candidates is None else candidates)
    if not candidates:
        raise ValidationError("threshold tuning needs at least one candidate")
    if not len(gen.poisoned()):
        logger.warning(f"GEN has no poisoned inputs; using the default threshold {settings.fallback_threshold}%")
        return settings.fallback_threshold
    if localization is None:
        if target is None:
            target = patterns[0].base_label if len(patterns) else 0
        localization = localize(model, gen, patterns, target, method, threads)

    pixel_count = localization.shape[0] * localization.shape[1]
    usable = [c for c in candidates if pixel_budget(c, pixel_count) > 0]
    if len(usable) < len(candidates):
        logger.warning(f"Skipping thresholds that select no pixel of a {pixel_count}-pixel image")
    if not usable:
        raise ValidationError(f"no threshold candidate selects a pixel of a {pixel_count}-pixel image")

    rates = sweep_thresholds(model, gen, patterns, localization, usable, mask_value, threads)
    best = min(rates)
    for candidate, rate in rates.items():
        if rate > rates[best]:
            best = candidate
    logger.info(f"Tuned threshold: {best}%")
    return best
