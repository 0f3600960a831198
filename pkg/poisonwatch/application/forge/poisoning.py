"""Trigger stamping, training-set poisoning and GEN/VAL splits."""

import math

import numpy as np

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.rng import SplitMix64, derive_seed
from poisonwatch.domain.models.dataset import Dataset, ImageSample, PoisonSpec, SplitSpec

logger = LoggerManager.get_logger(__name__)

# Guards floor(fraction * n) against products like 0.29 * 100 = 28.999...
_FLOOR_EPS = 1e-9


def _floor_count(fraction: float, n: int) -> int:
    return min(n, math.floor(fraction * n + _FLOOR_EPS))


def apply_trigger(image: ImageSample, spec: PoisonSpec) -> ImageSample:
    """Stamp the patch onto an image.

    Pixels inside the patch rectangle take patch_color on every channel; every
    other pixel is unchanged. Labels are kept, the poisoned flag is set.

    Raises:
        ValidationError: When the patch does not fit the image

    """
    height, width, channels = image.shape
    mask = spec.mask(height, width)
    pixels = np.array(image.pixels, copy=True)
    pixels[mask] = spec.color_for(channels)
    return ImageSample(
        pixels=pixels,
        ideal_label=image.ideal_label,
        train_label=image.train_label,
        poisoned=True,
        id=image.id,
    )


def _check_target(ds: Dataset, spec: PoisonSpec) -> None:
    if spec.target_label >= ds.class_count:
        raise ValidationError(f"target label {spec.target_label} outside [0, {ds.class_count})")


def poison_training_set(ds: Dataset, spec: PoisonSpec, fraction: float, seed: int) -> Dataset:
    """Poison floor(fraction * |ds|) randomly chosen samples.

    Chosen samples get the trigger and train_label = target; ideal_label is
    kept. Samples whose ideal label already is the target are never chosen, so
    the count is capped at the number of eligible samples.

    Args:
        ds: Clean training set
        spec: Trigger and target
        fraction: Share of the dataset to poison, in [0, 1]
        seed: Seed of the selection

    Returns:
        The dataset in its original order with the chosen samples replaced

    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must lie in [0, 1], got {fraction}")
    _check_target(ds, spec)
    if ds.image_shape is not None:
        spec.origin(ds.image_shape[0], ds.image_shape[1])

    eligible = [i for i, s in enumerate(ds.samples) if s.ideal_label != spec.target_label]
    count = _floor_count(fraction, len(ds))
    if count > len(eligible):
        logger.warning(f"Only {len(eligible)} samples are outside the target class, poisoning {len(eligible)} not {count}")
        count = len(eligible)

    picks = SplitMix64(derive_seed(seed, "poison")).sample_indices(len(eligible), count)
    chosen = {eligible[p] for p in picks}
    samples = list(ds.samples)
    for index in chosen:
        stamped = apply_trigger(samples[index], spec)
        samples[index] = stamped.model_copy(update={"train_label": spec.target_label})

    provenance = dict(ds.provenance)
    provenance["poison"] = {
        "spec": spec.model_dump(mode="json"),
        "fraction": fraction,
        "seed": seed,
        "poisoned_count": count,
    }
    logger.info(f"Poisoned {count} of {len(ds)} training samples toward label {spec.target_label}")
    return Dataset(samples=tuple(samples), class_count=ds.class_count, provenance=provenance)


def build_poisoned_test(clean_test: Dataset, spec: PoisonSpec) -> Dataset:
    """Triggered copies of the clean test samples outside the target class.

    Copies get fresh ids (offset past the largest clean id) so clean and
    poisoned test sets can be split together without id clashes.
    """
    _check_target(clean_test, spec)
    offset = max((s.id for s in clean_test.samples), default=-1) + 1
    samples = []
    for sample in clean_test.samples:
        if sample.ideal_label == spec.target_label:
            continue
        stamped = apply_trigger(sample, spec)
        samples.append(stamped.model_copy(update={"id": sample.id + offset}))
    provenance = dict(clean_test.provenance)
    provenance["poison"] = {"spec": spec.model_dump(mode="json"), "id_offset": offset, "test": True}
    return Dataset(samples=tuple(samples), class_count=clean_test.class_count, provenance=provenance)


def _pick(ds: Dataset, count: int, seed: int, token: str) -> tuple[list[ImageSample], list[ImageSample]]:
    """Split ds into (picked, rest), both in dataset order."""
    chosen = set(SplitMix64(derive_seed(seed, "split", token)).sample_indices(len(ds), count))
    picked = [s for i, s in enumerate(ds.samples) if i in chosen]
    rest = [s for i, s in enumerate(ds.samples) if i not in chosen]
    return picked, rest


def make_gen_val_split(clean_test: Dataset, poisoned_test: Dataset, split: SplitSpec) -> tuple[Dataset, Dataset]:
    """Build the GEN (offline analysis) and VAL (evaluation) sets.

    VAL holds half of the clean and half of the poisoned inputs. GEN holds the
    other clean half plus an alpha share of the remaining poisoned inputs.
    Sampling is uniform and unstratified.

    Returns:
        (GEN, VAL)

    Raises:
        ValidationError: When either input is empty

    """
    if not len(clean_test) or not len(poisoned_test):
        raise ValidationError("both the clean and the poisoned test sets must be non-empty")

    val_clean, gen_clean = _pick(clean_test, len(clean_test) // 2, split.seed, "clean")
    val_poisoned, rest_poisoned = _pick(poisoned_test, len(poisoned_test) // 2, split.seed, "poisoned")

    gen_count = _floor_count(split.alpha, len(rest_poisoned))
    if gen_count == 0 and rest_poisoned:
        logger.warning(f"alpha={split.alpha} selects no poisoned sample out of {len(rest_poisoned)}, using 1")
        gen_count = 1
    rest = poisoned_test.subset(rest_poisoned)
    gen_poisoned, _ = _pick(rest, gen_count, split.seed, "gen")

    class_count = max(clean_test.class_count, poisoned_test.class_count)
    provenance = {
        "split": split.model_dump(mode="json"),
        "clean_total": len(clean_test),
        "poisoned_total": len(poisoned_test),
    }
    gen = Dataset(samples=tuple(gen_clean + gen_poisoned), class_count=class_count, provenance=provenance)
    val = Dataset(samples=tuple(val_clean + val_poisoned), class_count=class_count, provenance=provenance)
    logger.info(
        f"Split: GEN {len(gen_clean)} clean + {len(gen_poisoned)} poisoned, "
        f"VAL {len(val_clean)} clean + {len(val_poisoned)} poisoned"
    )
    return gen, val
