"""Seeded He-style weight initialization."""

import numpy as np

from poisonwatch.core.rng import derive_seed, numpy_generator
from poisonwatch.domain.models.network import (
    LayerSpec,
    Model,
    expected_weight_shapes,
    infer_output_shapes,
    resolve_flagged_layer,
)


def he_initialize(
    layers: list[LayerSpec],
    input_shape: tuple[int, ...],
    class_count: int,
    seed: int,
    dtype: type = np.float32,
) -> Model:
    """Build a model with N(0, 2 / fan_in) kernels and zero biases.

    Each parametric layer draws from its own generator derived from
    (seed, "init", layer_id), so inserting a parameter-free layer does not
    reshuffle the others.
    """
    layers = resolve_flagged_layer(list(layers))
    shapes = infer_output_shapes(tuple(layers), tuple(input_shape))
    weights: list[tuple[np.ndarray, ...]] = []
    in_shape = tuple(input_shape)
    for layer_id, layer in enumerate(layers):
        expected = expected_weight_shapes(layer, in_shape)
        if expected:
            kernel_shape, bias_shape = expected
            fan_in = int(np.prod(kernel_shape[:-1])) if layer.kind == "conv2d" else kernel_shape[1]
            rng = numpy_generator(derive_seed(seed, "init", layer_id))
            kernel = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=kernel_shape).astype(dtype)
            weights.append((kernel, np.zeros(bias_shape, dtype=dtype)))
        else:
            weights.append(())
        in_shape = shapes[layer_id]
    return Model.create(layers, weights, class_count, input_shape)
