"""STRIP entropy baseline.

An input is blended with clean overlays; a backdoored model keeps predicting
the target on triggered blends, so their mean prediction entropy stays low.
"""

import numpy as np

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.nn.engine import predict_proba_batch
from poisonwatch.core.parallel import map_ordered
from poisonwatch.core.rng import SplitMix64, derive_seed
from poisonwatch.domain.models.dataset import Dataset
from poisonwatch.domain.models.evaluation import StripConfig
from poisonwatch.domain.models.monitor import Verdict
from poisonwatch.domain.models.network import Model

logger = LoggerManager.get_logger(__name__)


def blend(image: np.ndarray, overlays: np.ndarray, weight: float) -> np.ndarray:
    """clamp(weight * image + (1 - weight) * overlay) for every overlay."""
    return np.clip(weight * image + (1.0 - weight) * overlays, 0.0, 1.0).astype(np.float32)


def shannon_entropy(probabilities: np.ndarray) -> np.ndarray:
    """Base-2 entropy of each row; zero probabilities contribute nothing."""
    safe = np.where(probabilities > 0.0, probabilities, 1.0)
    return np.maximum(-(probabilities * np.log2(safe)).sum(axis=-1), 0.0)


def overlay_indices(cfg: StripConfig, sample_id: int | None = None) -> list[int]:
    """Pool positions blended with one query, seeded by (seed, sample_id).

    A query that is itself in the pool is never blended with its own image.
    Overlays are distinct while the pool allows it and drawn with replacement
    otherwise.

    Raises:
        ValidationError: When the pool holds nothing but the query itself

    """
    rng = SplitMix64(derive_seed(cfg.seed, "strip", 0 if sample_id is None else sample_id))
    candidates = [i for i, s in enumerate(cfg.pool.samples) if s.id != sample_id]
    if not candidates:
        raise ValidationError("the STRIP overlay pool holds no other image", context=f"sample {sample_id}")
    if cfg.overlay_count <= len(candidates):
        return [candidates[i] for i in rng.sample_indices(len(candidates), cfg.overlay_count)]
    return [rng.choice(candidates) for _ in range(cfg.overlay_count)]


def strip_entropy(model: Model, image: np.ndarray, cfg: StripConfig, sample_id: int | None = None) -> float:
    """Mean base-2 prediction entropy over overlay_count blends of image.

    Args:
        model: Classifier under test
        image: Query pixels
        cfg: Overlay pool and blend parameters
        sample_id: Id of the query; a pool sample with this id is not used as overlay

    """
    overlays = cfg.pool.images()[overlay_indices(cfg, sample_id)]
    probabilities = predict_proba_batch(model, blend(np.asarray(image), overlays, cfg.blend))
    return float(shannon_entropy(probabilities).mean())


def strip_entropies(model: Model, ds: Dataset, cfg: StripConfig, threads: int = 1) -> np.ndarray:
    """strip_entropy of every sample, keyed by sample id for the overlay picks."""
    pool = cfg.pool.images()

    def one(index: int) -> float:
        sample = ds.samples[index]
        overlays = pool[overlay_indices(cfg, sample.id)]
        probabilities = predict_proba_batch(model, blend(sample.pixels, overlays, cfg.blend))
        return float(shannon_entropy(probabilities).mean())

    return np.array(map_ordered(one, range(len(ds)), threads), dtype=np.float64)


def strip_detect(entropy: float, threshold: float) -> Verdict:
    """Poisoned when entropy < threshold (strict)."""
    return Verdict(outcome="poisoned" if entropy < threshold else "clean", source="strip")


def calibrate_threshold(clean_entropies: np.ndarray, fp_percentile: float = 1.0) -> float:
    """Entropy at the given percentile of clean inputs.

    Raises:
        ValidationError: When no clean entropy is given

    """
    clean_entropies = np.asarray(clean_entropies, dtype=np.float64)
    if not clean_entropies.size:
        raise ValidationError("cannot calibrate STRIP without clean entropies")
    threshold = float(np.percentile(clean_entropies, fp_percentile))
    logger.info(f"STRIP threshold at the {fp_percentile}th clean percentile: {threshold:.6f}")
    return threshold
