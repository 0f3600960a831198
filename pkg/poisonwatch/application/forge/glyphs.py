"""Deterministic synthetic glyph datasets.

Each class renders one parametric glyph on a dim noisy background. Per-sample
jitter (offset, scale, brightness) and noise come from a generator seeded by
(seed, sample id), so samples can be rendered in any order or in parallel.
"""

from collections.abc import Callable

import numpy as np

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.rng import derive_seed, numpy_generator
from poisonwatch.domain.models.dataset import Dataset, ImageSample

logger = LoggerManager.get_logger(__name__)

# (y, x, s) -> boolean mask over normalized coordinates in [-1, 1]
GlyphFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

NOISE_STD = 0.04
BACKGROUND_MAX = 0.15


def _hbar(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return (np.abs(y) < 0.2 * s) & (np.abs(x) < 0.65 * s)


def _vbar(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return _hbar(x, y, s)


def _disk(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return np.hypot(y, x) < 0.5 * s


def _ring(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return np.abs(np.hypot(y, x) - 0.5 * s) < 0.14 * s


def _cross(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return _hbar(y, x, s) | _vbar(y, x, s)


def _diagonal(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return (np.abs(y - x) < 0.25 * s) & (np.abs(x) < 0.6 * s)


def _frame(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    edge = np.maximum(np.abs(y), np.abs(x))
    return (edge > 0.4 * s) & (edge < 0.62 * s)


def _x_mark(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    inside = (np.abs(x) < 0.6 * s) & (np.abs(y) < 0.6 * s)
    return inside & ((np.abs(y - x) < 0.2 * s) | (np.abs(y + x) < 0.2 * s))


def _triangle(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return (y > -0.55 * s) & (y < 0.55 * s) & (np.abs(x) < 0.55 * (y + 0.55 * s))


def _corners(y: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    return (np.abs(np.abs(y) - 0.4 * s) < 0.15 * s) & (np.abs(np.abs(x) - 0.4 * s) < 0.15 * s)


GLYPHS: tuple[tuple[str, GlyphFn], ...] = (
    ("hbar", _hbar),
    ("vbar", _vbar),
    ("disk", _disk),
    ("ring", _ring),
    ("cross", _cross),
    ("diagonal", _diagonal),
    ("frame", _frame),
    ("x-mark", _x_mark),
    ("triangle", _triangle),
    ("corners", _corners),
)


def render_glyph(label: int, height: int, width: int, channels: int, seed: int, sample_id: int) -> np.ndarray:
    """Render one jittered, noisy glyph image with values in [0, 1]."""
    rng = numpy_generator(derive_seed(seed, "forge", sample_id))
    dy, dx = rng.uniform(-0.15, 0.15, size=2)
    scale = rng.uniform(0.85, 1.1)
    brightness = rng.uniform(0.6, 0.9)
    background = rng.uniform(0.0, BACKGROUND_MAX)

    rows = (np.arange(height) + 0.5) / height * 2.0 - 1.0
    cols = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    y, x = np.meshgrid(rows - dy, cols - dx, indexing="ij")
    mask = GLYPHS[label][1](y, x, scale).astype(np.float64)

    image = background + mask[..., np.newaxis] * (brightness - background)
    image = np.broadcast_to(image, (height, width, channels)) + rng.normal(0.0, NOISE_STD, (height, width, channels))
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def gen_synthetic(
    class_count: int,
    per_class: int,
    height: int,
    width: int,
    channels: int,
    seed: int,
) -> Dataset:
    """Generate a labeled glyph dataset.

    Samples are interleaved by class: sample id i has label i % class_count.

    Args:
        class_count: Number of classes, one glyph each
        per_class: Samples per class (0 yields an empty dataset)
        height: Image rows
        width: Image columns
        channels: Image channels
        seed: Master seed

    Returns:
        The dataset, bitwise identical for identical arguments

    Raises:
        ValidationError: When class_count is below 2 or exceeds the glyph family

    """
    if class_count < 2:
        raise ValidationError(f"class_count must be at least 2, got {class_count}")
    if class_count > len(GLYPHS):
        raise ValidationError(f"only {len(GLYPHS)} glyphs are available, {class_count} classes requested")
    if per_class < 0 or min(height, width, channels) < 1:
        raise ValidationError("per_class must be >= 0 and every image dimension >= 1")

    logger.info(f"Rendering {class_count * per_class} glyph images of {height}x{width}x{channels}")
    samples = []
    for sample_id in range(class_count * per_class):
        label = sample_id % class_count
        pixels = render_glyph(label, height, width, channels, seed, sample_id)
        samples.append(ImageSample(pixels=pixels, ideal_label=label, id=sample_id))

    provenance = {
        "generator": "glyphs",
        "seed": seed,
        "per_class": per_class,
        "shape": [height, width, channels],
        "glyphs": [name for name, _ in GLYPHS[:class_count]],
    }
    return Dataset(samples=tuple(samples), class_count=class_count, provenance=provenance)
