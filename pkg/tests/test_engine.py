import math

import numpy as np
import pytest

from poisonwatch.core.exceptions import ShapeError, ValidationError
from poisonwatch.core.nn.engine import (
    backward_loss,
    forward,
    grad_class_wrt_layer,
    predict,
    predict_batch,
)
from poisonwatch.core.nn.init import he_initialize
from poisonwatch.core.nn.layers import layer_forward
from poisonwatch.domain.models.network import INPUT_LAYER_ID, LayerSpec

FD_STEP = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def class_score(model, x, class_index):
    logits, _ = forward(model, x)
    return float(logits[class_index])


def test_identity_dense_passes_logits_through(build_dense):
    model = build_dense([np.eye(3)], (3,))
    logits, trace = forward(model, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(logits, [1.0, 2.0, 3.0])
    assert len(trace) == len(model.layers)
    assert predict(model, np.array([3.0, 1.0, 2.0])) == 0


def test_relu_layer():
    out = layer_forward(LayerSpec(kind="relu"), (), np.array([[-1.0, 0.0, 2.0]]))
    np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])


def test_two_layer_net_matches_hand_product(build_dense, rng):
    w1 = rng.normal(size=(4, 3)).astype(np.float32)
    w2 = rng.normal(size=(2, 4)).astype(np.float32)
    model = build_dense([w1, w2], (3,))
    x = rng.normal(size=3).astype(np.float32)
    logits, _ = forward(model, x)
    expected = w2.astype(np.float64) @ np.maximum(w1.astype(np.float64) @ x, 0.0)
    np.testing.assert_allclose(logits, expected, atol=1e-6)


def test_ties_go_to_lowest_index(build_dense):
    model = build_dense([np.eye(2)], (2,))
    assert predict(model, np.array([0.5, 0.5])) == 0
    np.testing.assert_array_equal(predict_batch(model, np.array([[0.1, 0.9], [0.0, 0.0]])), [1, 0])


def test_linear_input_gradient_is_weight_row(build_dense, rng):
    w = rng.normal(size=(3, 4))
    model = build_dense([w], (4,)).astype(np.float64)
    grad = grad_class_wrt_layer(model, rng.normal(size=4), 2, INPUT_LAYER_ID)
    np.testing.assert_allclose(grad, w[2])


def test_relu_blocks_gradient_at_negative_preactivation(build_dense):
    model = build_dense([np.eye(2), np.eye(2)], (2,)).astype(np.float64)
    grad = grad_class_wrt_layer(model, np.array([-1.0, 2.0]), 0, INPUT_LAYER_ID)
    assert grad[0] == 0.0


def test_uniform_logits_give_log_k_loss(build_dense):
    model = build_dense([np.zeros((4, 3))], (3,))
    loss, _ = backward_loss(model, np.ones(3, dtype=np.float32), 1)
    assert loss == pytest.approx(math.log(4), rel=1e-6)


def test_confident_logit_gives_vanishing_loss(build_dense):
    model = build_dense([np.diag([100.0, 100.0])], (2,)).astype(np.float64)
    loss, _ = backward_loss(model, np.array([1.0, 0.0]), 0)
    assert loss < 1e-12


def test_class_gradients_match_finite_differences(tiny_cnn):
    layers = list(tiny_cnn.layers)
    for seed in range(100):
        model = he_initialize(layers, (6, 6, 2), 3, seed=seed).astype(np.float64)
        x = np.random.default_rng(seed).uniform(size=(6, 6, 2))
        class_index = seed % 3
        analytic = grad_class_wrt_layer(model, x, class_index, INPUT_LAYER_ID)
        numeric = np.zeros_like(x)
        for index in np.ndindex(x.shape):
            up, down = x.copy(), x.copy()
            up[index] += FD_STEP
            down[index] -= FD_STEP
            numeric[index] = (class_score(model, up, class_index) - class_score(model, down, class_index)) / (2 * FD_STEP)
        assert relative_error(analytic, numeric) <= 1e-3, f"seed {seed}"


def test_hidden_layer_gradient_matches_finite_differences(tiny_cnn, rng):
    x = rng.uniform(size=(6, 6, 2))
    flagged = tiny_cnn.flagged_layer_id
    analytic = grad_class_wrt_layer(tiny_cnn, x, 1, flagged)
    assert analytic.shape == tiny_cnn.output_shapes[flagged]
    # The flagged dense output feeds relu -> dense, so its gradient is W2[1] masked by the relu.
    _, trace = forward(tiny_cnn, x)
    w2 = tiny_cnn.weights[-1][0]
    np.testing.assert_allclose(analytic, w2[1] * (trace[flagged] > 0))


def test_weight_gradients_match_finite_differences(tiny_cnn):
    layers = list(tiny_cnn.layers)
    for seed in range(100):
        model = he_initialize(layers, (6, 6, 2), 3, seed=1000 + seed).astype(np.float64)
        x = np.random.default_rng(seed).uniform(size=(6, 6, 2))
        target = seed % 3
        _, grads = backward_loss(model, x, target)
        for layer_id, layer_weights in enumerate(model.weights):
            for weight_index, weight in enumerate(layer_weights):
                numeric = np.zeros_like(weight)
                for index in np.ndindex(weight.shape):
                    losses = []
                    for step in (FD_STEP, -FD_STEP):
                        params = [list(lw) for lw in model.weights]
                        perturbed = np.array(weight, copy=True)
                        perturbed[index] += step
                        params[layer_id][weight_index] = perturbed
                        losses.append(backward_loss(model.with_weights(tuple(tuple(p) for p in params)), x, target)[0])
                    numeric[index] = (losses[0] - losses[1]) / (2 * FD_STEP)
                error = relative_error(grads[layer_id][weight_index], numeric)
                assert error <= 1e-3, f"seed {seed}, layer {layer_id}, weight {weight_index}"


def test_wrong_input_shape_names_first_layer(tiny_cnn):
    with pytest.raises(ShapeError, match="layer 0"):
        forward(tiny_cnn, np.zeros((5, 5, 2)))


def test_bad_class_and_layer_are_rejected(tiny_cnn):
    x = np.zeros((6, 6, 2))
    with pytest.raises(ValidationError):
        grad_class_wrt_layer(tiny_cnn, x, 3, INPUT_LAYER_ID)
    with pytest.raises(ValidationError):
        grad_class_wrt_layer(tiny_cnn, x, 0, 1)


def test_forward_does_not_mutate_inputs(tiny_cnn, rng):
    x = rng.uniform(size=(6, 6, 2))
    before = x.copy()
    forward(tiny_cnn, x)
    grad_class_wrt_layer(tiny_cnn, x, 0, INPUT_LAYER_ID)
    np.testing.assert_array_equal(x, before)
