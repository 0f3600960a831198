"""Run-time detection and input repair.

One forward pass yields the monitored activations and the original label. The
first pattern of P (highest support) that matches decides the verdict. A
poisoned input is repaired once: either its important pixels are masked and
the model is asked again, or a label is guessed from P_c. Inputs are never
modified in place.
"""

import numpy as np

from poisonwatch.application.mining.miner import layer_values_and_predictions
from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.nn.engine import forward, predict_batch
from poisonwatch.core.parallel import map_batches
from poisonwatch.core.rng import SplitMix64, derive_seed
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.monitor import DefenseResult, MonitorConfig, Verdict
from poisonwatch.domain.models.network import Model
from poisonwatch.domain.models.patterns import Pattern, PatternSet

logger = LoggerManager.get_logger(__name__)


def match(pattern: Pattern, activations: np.ndarray) -> bool:
    """True iff every conjunct of the pattern holds on the activation vector."""
    return pattern.matches(activations)


def detect(activations: np.ndarray, patterns: PatternSet) -> Verdict:
    """Verdict from the first (highest-support) matching pattern; no match is clean."""
    index = patterns.first_match(activations)
    if index is None:
        return Verdict(outcome="clean")
    return Verdict(outcome="poisoned", matched_pattern_index=index)


def correct_input(
    image: np.ndarray, pixels: list[int] | tuple[int, ...], mask_value: float | tuple[float, ...]
) -> np.ndarray:
    """Fresh copy of image with the listed spatial pixels set to mask_value on every channel.

    Raises:
        ValidationError: When a pixel index is out of range or mask_value does
            not match the channel count

    """
    corrected = np.array(image, copy=True)
    height, width = corrected.shape[0], corrected.shape[1]
    index = np.asarray(pixels, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= height * width):
        raise ValidationError(f"pixel index outside a {height}x{width} image")
    values = np.atleast_1d(np.asarray(mask_value, dtype=corrected.dtype))
    channels = corrected.shape[2] if corrected.ndim == 3 else 1
    if values.size not in (1, channels):
        raise ValidationError(f"{values.size} mask values for {channels} channels")
    rows, cols = np.divmod(index, width)
    corrected[rows, cols] = values if values.size > 1 else values[0]
    return corrected


def guess_label(
    activations: np.ndarray,
    pc_patterns: PatternSet,
    target: int | None,
    rng: SplitMix64,
    class_count: int,
) -> int:
    """Label of the first matching P_c pattern, else a uniform non-target label.

    Raises:
        ValidationError: When class_count leaves no label to guess

    """
    index = pc_patterns.first_match(activations)
    if index is not None:
        return pc_patterns[index].base_label
    choices = [label for label in range(class_count) if label != target]
    if class_count < 2 or not choices:
        raise ValidationError(f"cannot guess a label among {class_count} classes excluding {target}")
    return rng.choice(choices)


def _guess_rng(cfg: MonitorConfig, sample_id: int) -> SplitMix64:
    return SplitMix64(derive_seed(cfg.seed, "guess", sample_id))


def classify_with_defense(model: Model, image: np.ndarray, cfg: MonitorConfig, sample_id: int = 0) -> DefenseResult:
    """Classify one input under the monitor.

    Args:
        model: The possibly backdoored classifier
        image: One input sample; left untouched
        cfg: Monitor configuration
        sample_id: Id seeding the label-guess fallback

    Returns:
        The verdict and the final label (and the repaired image when masked)

    """
    _, trace = forward(model, image)
    original = int(np.argmax(trace[model.logit_layer_id]))
    verdict = detect(trace[model.flagged_layer_id], cfg.patterns)
    if not verdict.poisoned:
        return DefenseResult(sample_id=sample_id, original_label=original, final_label=original, verdict=verdict)
    index = verdict.matched_pattern_index
    assert index is not None
    if cfg.mode == "input_mask":
        assert cfg.imp_pixels is not None
        corrected = correct_input(image, cfg.imp_pixels.pixels[index], cfg.mask_value)
        final = int(predict_batch(model, corrected[np.newaxis, ...])[0])
        return DefenseResult(
            sample_id=sample_id, original_label=original, final_label=final, verdict=verdict, corrected_image=corrected
        )
    assert cfg.pc_patterns is not None
    final = guess_label(
        trace[model.flagged_layer_id], cfg.pc_patterns, cfg.target_label, _guess_rng(cfg, sample_id), cfg.class_count
    )
    return DefenseResult(sample_id=sample_id, original_label=original, final_label=final, verdict=verdict)


def defend_dataset(
    model: Model, ds: Dataset, cfg: MonitorConfig, threads: int = 1, keep_images: bool = False
) -> list[DefenseResult]:
    """classify_with_defense over a dataset with batched forward passes.

    Results follow dataset order and do not depend on the thread count.
    """
    images = ds.images()
    values, original = layer_values_and_predictions(model, images, threads)
    verdicts = [detect(row, cfg.patterns) for row in values]

    flagged = [i for i, v in enumerate(verdicts) if v.poisoned]
    final = original.copy()
    corrected: dict[int, np.ndarray] = {}
    if flagged and cfg.mode == "input_mask":
        assert cfg.imp_pixels is not None
        for i in flagged:
            index = verdicts[i].matched_pattern_index
            assert index is not None
            corrected[i] = correct_input(images[i], cfg.imp_pixels.pixels[index], cfg.mask_value)
        repaired = np.stack([corrected[i] for i in flagged])
        final[flagged] = map_batches(lambda batch: predict_batch(model, batch), repaired, threads)
    elif flagged:
        assert cfg.pc_patterns is not None
        for i in flagged:
            sample_id = ds.samples[i].id
            rng = _guess_rng(cfg, sample_id)
            final[i] = guess_label(values[i], cfg.pc_patterns, cfg.target_label, rng, cfg.class_count)

    results = [
        DefenseResult(
            sample_id=sample.id,
            original_label=int(original[i]),
            final_label=int(final[i]),
            verdict=verdicts[i],
            corrected_image=corrected.get(i) if keep_images else None,
        )
        for i, sample in enumerate(ds.samples)
    ]
    logger.info(f"Monitored {len(results)} inputs, flagged {len(flagged)}")
    return results
