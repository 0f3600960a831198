"""Inference and reverse-mode gradients over sequential models.

Gradients are computed by walking the recorded per-layer outputs backwards;
there is no tape. All functions are pure: models and inputs are never mutated.
"""

import numpy as np

from poisonwatch.core.exceptions import ShapeError, ValidationError
from poisonwatch.core.logger import LoggerManager
from poisonwatch.core.nn.layers import layer_backward, layer_forward, softmax
from poisonwatch.domain.models.network import INPUT_LAYER_ID, ForwardTrace, Model

logger = LoggerManager.get_logger(__name__)

WeightGradients = tuple[tuple[np.ndarray, ...], ...]


def _as_batch(model: Model, inputs: np.ndarray) -> np.ndarray:
    batch = np.asarray(inputs, dtype=model.dtype)
    expected = tuple(model.input_shape)
    if batch.ndim != len(expected) + 1 or tuple(batch.shape[1:]) != expected:
        first = model.layers[0].describe(0)
        raise ShapeError(f"expects inputs of shape {expected}, got {tuple(batch.shape[1:])}", context=first)
    return batch


def forward_batch(model: Model, inputs: np.ndarray) -> list[np.ndarray]:
    """Run a batch through the model.

    Args:
        model: The classifier
        inputs: Array of shape (N, *model.input_shape)

    Returns:
        Per-layer outputs, each with a leading batch axis

    Raises:
        ShapeError: When the batch does not match the model's input shape
        ValidationError: When a layer produces non-finite values

    """
    x = _as_batch(model, inputs)
    outputs: list[np.ndarray] = []
    for layer_id, (layer, weights) in enumerate(zip(model.layers, model.weights, strict=True)):
        x = layer_forward(layer, weights, x)
        if not np.isfinite(x).all():
            raise ValidationError("produced non-finite values", context=layer.describe(layer_id))
        outputs.append(x)
    return outputs


def forward(model: Model, inputs: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Run one input and record every layer output.

    Returns:
        (logits, trace) where logits is the last trace entry

    """
    outputs = forward_batch(model, np.asarray(inputs)[np.newaxis, ...])
    trace = ForwardTrace(outputs=tuple(out[0] for out in outputs))
    return trace[len(trace) - 1], trace


def class_scores(model: Model, outputs: list[np.ndarray]) -> np.ndarray:
    """Pre-softmax class scores from a batch trace."""
    return outputs[model.logit_layer_id]


def predict_batch(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Argmax labels for a batch; ties go to the lowest index."""
    return class_scores(model, forward_batch(model, inputs)).argmax(axis=1)


def predict(model: Model, inputs: np.ndarray) -> int:
    """Predicted label of one input; ties go to the lowest index."""
    return int(predict_batch(model, np.asarray(inputs)[np.newaxis, ...])[0])


def _layer_input(batch: np.ndarray, outputs: list[np.ndarray], layer_id: int) -> np.ndarray:
    return batch if layer_id == 0 else outputs[layer_id - 1]


def _backpropagate(
    model: Model,
    batch: np.ndarray,
    outputs: list[np.ndarray],
    grad_scores: np.ndarray,
    stop_layer: int,
    want_weights: bool,
) -> tuple[np.ndarray, list[tuple[np.ndarray, ...]]]:
    """Walk from the score layer down to the output of stop_layer."""
    weight_grads: list[tuple[np.ndarray, ...]] = [() for _ in model.layers]
    grad = grad_scores
    for layer_id in range(model.logit_layer_id, stop_layer, -1):
        layer = model.layers[layer_id]
        layer_in = _layer_input(batch, outputs, layer_id)
        grad, layer_weight_grads = layer_backward(layer, model.weights[layer_id], layer_in, outputs[layer_id], grad)
        if want_weights:
            weight_grads[layer_id] = layer_weight_grads
    return grad, weight_grads


def _check_class(model: Model, class_index: int) -> None:
    if not 0 <= class_index < model.class_count:
        raise ValidationError(f"class index {class_index} outside [0, {model.class_count})")


def _check_gradient_layer(model: Model, layer_id: int) -> None:
    if layer_id == INPUT_LAYER_ID:
        return
    if not 0 <= layer_id < len(model.layers):
        raise ValidationError(f"layer id {layer_id} outside the model's {len(model.layers)} layers")
    if model.layers[layer_id].kind not in {"conv2d", "dense"}:
        raise ValidationError(
            "class gradients are taken at conv2d or dense layers (or the input)",
            context=model.layers[layer_id].describe(layer_id),
        )
    if layer_id > model.logit_layer_id:
        raise ValidationError("layer sits above the class scores", context=model.layers[layer_id].describe(layer_id))


def grad_class_batch(
    model: Model, inputs: np.ndarray, class_index: int, layer_id: int
) -> tuple[np.ndarray, list[np.ndarray]]:
    """d(score of class_index)/d(output of layer_id) for every input of a batch.

    Returns:
        (gradients with a leading batch axis, the batch trace)

    """
    _check_class(model, class_index)
    _check_gradient_layer(model, layer_id)
    batch = _as_batch(model, inputs)
    outputs = forward_batch(model, batch)
    grad_scores = np.zeros_like(class_scores(model, outputs))
    grad_scores[:, class_index] = 1
    grad, _ = _backpropagate(model, batch, outputs, grad_scores, stop_layer=layer_id, want_weights=False)
    return grad, outputs


def grad_class_wrt_layer(model: Model, inputs: np.ndarray, class_index: int, layer_id: int) -> np.ndarray:
    """Gradient of one class score with respect to one layer's output.

    Args:
        model: The classifier
        inputs: One input sample
        class_index: Class whose pre-softmax score is differentiated
        layer_id: conv2d or dense layer id, or INPUT_LAYER_ID for the input

    Returns:
        Array shaped like that layer's single-sample output

    """
    grad, _ = grad_class_batch(model, np.asarray(inputs)[np.newaxis, ...], class_index, layer_id)
    return grad[0]


def cross_entropy(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row cross-entropy of softmax(scores) against integer targets."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return log_norm - shifted[np.arange(len(targets)), targets]


def backward_loss_batch(model: Model, inputs: np.ndarray, targets: np.ndarray) -> tuple[float, WeightGradients]:
    """Mean cross-entropy over a batch and its weight gradients."""
    batch = _as_batch(model, inputs)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (batch.shape[0],):
        raise ShapeError(f"{batch.shape[0]} inputs but {targets.shape} targets")
    if targets.size and (targets.min() < 0 or targets.max() >= model.class_count):
        raise ValidationError(f"targets must lie in [0, {model.class_count})")
    outputs = forward_batch(model, batch)
    scores = class_scores(model, outputs)
    losses = cross_entropy(scores, targets)
    grad_scores = softmax(scores)
    grad_scores[np.arange(len(targets)), targets] -= 1
    grad_scores /= len(targets)
    _, weight_grads = _backpropagate(model, batch, outputs, grad_scores, stop_layer=INPUT_LAYER_ID, want_weights=True)
    return float(losses.mean()), tuple(weight_grads)


def backward_loss(model: Model, inputs: np.ndarray, target: int) -> tuple[float, WeightGradients]:
    """Cross-entropy of one input against target, with gradients shaped like the weights."""
    return backward_loss_batch(model, np.asarray(inputs)[np.newaxis, ...], np.array([target]))


def predict_proba_batch(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Softmax class distribution per input."""
    return softmax(class_scores(model, forward_batch(model, inputs)).astype(np.float64))
