"""Layer specifications, models and forward traces."""

from typing import Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from poisonwatch.core.exceptions import ShapeError, ValidationError
from poisonwatch.core.logger import LoggerManager

logger = LoggerManager.get_logger(__name__)

LayerKind = Literal["conv2d", "maxpool2d", "flatten", "dense", "relu", "softmax"]
PARAMETRIC_KINDS: frozenset[str] = frozenset({"conv2d", "dense"})

# Layer id naming the network input in gradient queries.
INPUT_LAYER_ID = -1


class LayerSpec(BaseModel):
    """One layer of a sequential network.

    Attributes:
        kind: Layer type
        filters: Output channels of a conv2d layer
        kernel_size: Window size of conv2d / maxpool2d layers
        stride: Step of conv2d / maxpool2d windows (maxpool defaults to kernel_size)
        padding: Zero padding on each spatial border of a conv2d layer
        units: Width of a dense layer
        flagged: Marks the dense layer whose values are monitored

    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: LayerKind
    filters: int | None = Field(default=None, ge=1)
    kernel_size: int | None = Field(default=None, ge=1)
    stride: int | None = Field(default=None, ge=1)
    padding: int = Field(default=0, ge=0)
    units: int | None = Field(default=None, ge=1)
    flagged: bool = False

    @model_validator(mode="after")
    def validate_params(self) -> Self:
        """Check that the kind-specific parameters are present."""
        match self.kind:
            case "conv2d":
                if self.filters is None or self.kernel_size is None:
                    raise ValueError("conv2d needs filters and kernel_size")
            case "maxpool2d":
                if self.kernel_size is None:
                    raise ValueError("maxpool2d needs kernel_size")
            case "dense":
                if self.units is None:
                    raise ValueError("dense needs units")
            case _:
                pass
        if self.flagged and self.kind != "dense":
            raise ValueError("only a dense layer can be flagged")
        return self

    @property
    def effective_stride(self) -> int:
        """Stride with the maxpool default applied."""
        if self.stride is not None:
            return self.stride
        return self.kernel_size if self.kind == "maxpool2d" and self.kernel_size else 1

    def describe(self, layer_id: int) -> str:
        """Short label used in diagnostics."""
        return f"layer {layer_id} ({self.kind})"


def infer_output_shapes(layers: tuple[LayerSpec, ...], input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Propagate a single-sample input shape through the layers.

    Raises:
        ShapeError: naming the first layer whose input does not fit

    """
    shapes: list[tuple[int, ...]] = []
    shape = tuple(input_shape)
    for layer_id, layer in enumerate(layers):
        where = layer.describe(layer_id)
        match layer.kind:
            case "conv2d" | "maxpool2d":
                if len(shape) != 3:
                    raise ShapeError(f"expects an H x W x C input, got {shape}", context=where)
                height, width, channels = shape
                k = layer.kernel_size or 1
                s = layer.effective_stride
                pad = layer.padding if layer.kind == "conv2d" else 0
                out_h = (height + 2 * pad - k) // s + 1
                out_w = (width + 2 * pad - k) // s + 1
                if out_h < 1 or out_w < 1:
                    raise ShapeError(f"window {k}x{k} does not fit input {shape}", context=where)
                out_c = layer.filters if layer.kind == "conv2d" else channels
                shape = (out_h, out_w, int(out_c or channels))
            case "flatten":
                shape = (int(np.prod(shape)),)
            case "dense":
                if len(shape) != 1:
                    raise ShapeError(f"expects a flat input, got {shape}; add a flatten layer", context=where)
                shape = (int(layer.units or 0),)
            case "relu" | "softmax":
                pass
        shapes.append(shape)
    return shapes


def expected_weight_shapes(layer: LayerSpec, in_shape: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Shapes of (kernel, bias) for parametric layers, () otherwise.

    conv2d kernels are (kh, kw, in_channels, filters); dense kernels are
    (units, in_features) so that y = W x + b.
    """
    if layer.kind == "conv2d":
        k = int(layer.kernel_size or 1)
        filters = int(layer.filters or 1)
        return ((k, k, in_shape[-1], filters), (filters,))
    if layer.kind == "dense":
        units = int(layer.units or 1)
        return ((units, in_shape[0]), (units,))
    return ()


def resolve_flagged_layer(layers: list[LayerSpec]) -> list[LayerSpec]:
    """Flag the last dense layer before the output when no layer is flagged.

    With a single dense layer, that layer is flagged.
    """
    if any(layer.flagged for layer in layers):
        return layers
    dense_ids = [i for i, layer in enumerate(layers) if layer.kind == "dense"]
    if not dense_ids:
        return layers
    target = dense_ids[-2] if len(dense_ids) >= 2 else dense_ids[-1]
    resolved = list(layers)
    resolved[target] = layers[target].model_copy(update={"flagged": True})
    return resolved


def _freeze(array: np.ndarray) -> np.ndarray:
    frozen = np.ascontiguousarray(array)
    frozen.setflags(write=False)
    return frozen


class Model(BaseModel):
    """A sequential classifier: layer specs plus per-layer weight tensors.

    Attributes:
        layers: Ordered layer specifications
        weights: For each layer, (kernel, bias) when parametric, () otherwise
        class_count: Number of output classes
        input_shape: Shape of one input sample (H x W x C, or flat)

    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    layers: tuple[LayerSpec, ...]
    weights: tuple[tuple[np.ndarray, ...], ...]
    class_count: int = Field(ge=1)
    input_shape: tuple[int, ...]

    @field_validator("weights", mode="before")
    @classmethod
    def freeze_weights(cls, value: Any) -> tuple[tuple[np.ndarray, ...], ...]:
        """Store read-only contiguous copies so models stay immutable."""
        return tuple(tuple(_freeze(np.array(w)) for w in layer_weights) for layer_weights in value)

    @model_validator(mode="after")
    def validate_model(self) -> Self:
        """Check weight shapes, the flagged layer and the output width."""
        if not self.layers:
            raise ValidationError("a model needs at least one layer")
        if len(self.weights) != len(self.layers):
            raise ValidationError(f"{len(self.layers)} layers but {len(self.weights)} weight groups")
        flagged = [i for i, layer in enumerate(self.layers) if layer.flagged]
        if len(flagged) != 1:
            raise ValidationError(f"exactly one dense layer must be flagged, found {len(flagged)}")
        if self.layers[-1].kind == "softmax" and any(
            layer.kind == "softmax" for layer in self.layers[:-1]
        ):
            raise ValidationError("softmax is only supported as the final layer")
        shapes = infer_output_shapes(self.layers, self.input_shape)
        in_shape = tuple(self.input_shape)
        for layer_id, (layer, layer_weights) in enumerate(zip(self.layers, self.weights, strict=True)):
            expected = expected_weight_shapes(layer, in_shape)
            got = tuple(w.shape for w in layer_weights)
            if got != expected:
                raise ShapeError(f"weights {got} do not match expected {expected}", context=layer.describe(layer_id))
            in_shape = shapes[layer_id]
        if shapes[-1] != (self.class_count,):
            raise ShapeError(f"network output {shapes[-1]} does not match class_count {self.class_count}")
        return self

    @property
    def flagged_layer_id(self) -> int:
        """Id of the monitored dense layer."""
        return next(i for i, layer in enumerate(self.layers) if layer.flagged)

    @property
    def logit_layer_id(self) -> int:
        """Id of the layer producing pre-softmax class scores."""
        return len(self.layers) - 2 if self.layers[-1].kind == "softmax" else len(self.layers) - 1

    @property
    def last_conv_layer_id(self) -> int | None:
        """Id of the final convolutional layer, if any."""
        conv_ids = [i for i, layer in enumerate(self.layers) if layer.kind == "conv2d"]
        return conv_ids[-1] if conv_ids else None

    @property
    def output_shapes(self) -> list[tuple[int, ...]]:
        """Per-layer single-sample output shapes."""
        return infer_output_shapes(self.layers, self.input_shape)

    @property
    def dtype(self) -> np.dtype:
        """Floating type of the weights (float32 unless cast for checks)."""
        for layer_weights in self.weights:
            if layer_weights:
                return layer_weights[0].dtype
        return np.dtype(np.float32)

    def astype(self, dtype: Any) -> "Model":
        """Copy of this model with every weight cast to dtype."""
        return Model(
            layers=self.layers,
            weights=tuple(tuple(w.astype(dtype) for w in lw) for lw in self.weights),
            class_count=self.class_count,
            input_shape=self.input_shape,
        )

    def with_weights(self, weights: tuple[tuple[np.ndarray, ...], ...]) -> "Model":
        """Copy of this model with new weights (same specs)."""
        return Model(layers=self.layers, weights=weights, class_count=self.class_count, input_shape=self.input_shape)

    @classmethod
    def create(
        cls,
        layers: list[LayerSpec],
        weights: list[tuple[np.ndarray, ...]],
        class_count: int,
        input_shape: tuple[int, ...],
    ) -> "Model":
        """Build a model, flagging the monitored dense layer when none is flagged."""
        return cls(
            layers=tuple(resolve_flagged_layer(list(layers))),
            weights=tuple(tuple(w) for w in weights),
            class_count=class_count,
            input_shape=tuple(input_shape),
        )


class ForwardTrace(BaseModel):
    """Per-layer outputs recorded for one input, indexed by layer id."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    outputs: tuple[np.ndarray, ...]

    @field_validator("outputs", mode="before")
    @classmethod
    def freeze_outputs(cls, value: Any) -> tuple[np.ndarray, ...]:
        """Trace entries are read-only."""
        return tuple(_freeze(np.array(v)) for v in value)

    def __len__(self) -> int:
        return len(self.outputs)

    def __getitem__(self, layer_id: int) -> np.ndarray:
        return self.outputs[layer_id]
