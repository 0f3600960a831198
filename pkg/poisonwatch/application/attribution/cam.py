"""Gradient class-activation maps.

Maps are taken at the output of the last conv2d layer, combined with
per-channel weights, passed through ReLU and bilinearly upsampled to the input
resolution. Models without a conv layer use the absolute input gradient.
"""

import numpy as np

from poisonwatch.core.exceptions import ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.nn.engine import grad_class_batch
from poisonwatch.domain.models.heatmaps import AttributionMethod, Heatmap
from poisonwatch.domain.models.network import INPUT_LAYER_ID, Model

logger = LoggerManager.get_logger(__name__)


def _resize_axis(maps: np.ndarray, size: int, axis: int) -> np.ndarray:
    """Linear interpolation along one axis, half-pixel centers, edges clamped."""
    length = maps.shape[axis]
    if length == size:
        return maps
    source = (np.arange(size) + 0.5) * (length / size) - 0.5
    source = np.clip(source, 0.0, length - 1)
    low = np.floor(source).astype(np.int64)
    high = np.minimum(low + 1, length - 1)
    frac = source - low
    shape = [1] * maps.ndim
    shape[axis] = size
    frac = frac.reshape(shape)
    return np.take(maps, low, axis=axis) * (1.0 - frac) + np.take(maps, high, axis=axis) * frac


def upsample_bilinear(maps: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of (N, h, w) maps to (N, height, width)."""
    return _resize_axis(_resize_axis(maps, height, axis=1), width, axis=2)


def _gradcam_weights(activations: np.ndarray, grads: np.ndarray) -> np.ndarray:
    return grads.mean(axis=(1, 2))


def _gradcam_pp_weights(activations: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Closed-form GradCAM++ channel weights under an exponential score."""
    grads_2 = grads**2
    grads_3 = grads**3
    activation_sum = activations.sum(axis=(1, 2), keepdims=True)
    denominator = 2.0 * grads_2 + activation_sum * grads_3
    safe = np.where(denominator != 0.0, denominator, 1.0)
    alpha = np.where(denominator != 0.0, grads_2 / safe, 0.0)
    return (alpha * np.maximum(grads, 0.0)).sum(axis=(1, 2))


def attribution_maps_batch(
    model: Model, images: np.ndarray, class_index: int, method: AttributionMethod = "gradcam"
) -> np.ndarray:
    """Attribution maps (N, H, W) of class_index for a batch of images.

    Raises:
        ValidationError: When a CAM method is asked of a model without conv2d
            layers, or when the input is not H x W x C

    """
    images = np.asarray(images)
    if images.ndim != 4:
        raise ValidationError(f"attribution needs H x W x C images, got batch shape {images.shape}")
    height, width = images.shape[1], images.shape[2]

    if method == "input-gradient":
        grads, _ = grad_class_batch(model, images, class_index, INPUT_LAYER_ID)
        return np.abs(grads.astype(np.float64)).sum(axis=3)

    layer_id = model.last_conv_layer_id
    if layer_id is None:
        raise ValidationError(
            f"{method} needs a conv2d layer; use method 'input-gradient' for dense-only models"
        )
    grads, outputs = grad_class_batch(model, images, class_index, layer_id)
    activations = outputs[layer_id].astype(np.float64)
    grads = grads.astype(np.float64)
    weights = _gradcam_weights(activations, grads) if method == "gradcam" else _gradcam_pp_weights(activations, grads)
    cams = np.maximum(np.einsum("nhwk,nk->nhw", activations, weights), 0.0)
    return np.maximum(upsample_bilinear(cams, height, width), 0.0)


def attribution_map(
    model: Model, image: np.ndarray, class_index: int, method: AttributionMethod = "gradcam"
) -> Heatmap:
    """Attribution heatmap of one image for one class."""
    maps = attribution_maps_batch(model, np.asarray(image)[np.newaxis, ...], class_index, method)
    return Heatmap(values=maps[0], class_index=class_index, method=method)
