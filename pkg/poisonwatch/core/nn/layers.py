"""Batched forward and backward kernels for the supported layer kinds.

Activations are laid out (N, H, W, C) for spatial layers and (N, F) for flat
ones. Each backward kernel receives the layer input it saw in the forward pass
and the upstream gradient, and returns (input_grad, weight_grads).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from poisonwatch.domain.models.network import LayerSpec

WeightGrads = tuple[np.ndarray, ...]


def _conv_windows(x: np.ndarray, k: int, stride: int, padding: int) -> np.ndarray:
    """(N, Ho, Wo, kh, kw, C) view of the padded input's receptive fields."""
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    return windows.transpose(0, 1, 2, 4, 5, 3)


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, padding: int) -> np.ndarray:
    k, _, in_c, out_c = kernel.shape
    windows = _conv_windows(x, k, stride, padding)
    n, out_h, out_w = windows.shape[:3]
    cols = windows.reshape(n * out_h * out_w, k * k * in_c)
    out = cols @ kernel.reshape(k * k * in_c, out_c) + bias
    return out.reshape(n, out_h, out_w, out_c)


def conv2d_backward(
    x: np.ndarray, grad_out: np.ndarray, kernel: np.ndarray, stride: int, padding: int
) -> tuple[np.ndarray, WeightGrads]:
    k, _, in_c, out_c = kernel.shape
    windows = _conv_windows(x, k, stride, padding)
    n, out_h, out_w = windows.shape[:3]
    cols = windows.reshape(n * out_h * out_w, k * k * in_c)
    grad_flat = grad_out.reshape(n * out_h * out_w, out_c)

    grad_kernel = (cols.T @ grad_flat).reshape(kernel.shape)
    grad_bias = grad_flat.sum(axis=0)

    grad_cols = (grad_flat @ kernel.reshape(k * k * in_c, out_c).T).reshape(n, out_h, out_w, k, k, in_c)
    height, width = x.shape[1], x.shape[2]
    grad_padded = np.zeros((n, height + 2 * padding, width + 2 * padding, in_c), dtype=grad_out.dtype)
    for i in range(k):
        for j in range(k):
            grad_padded[:, i : i + stride * out_h : stride, j : j + stride * out_w : stride, :] += grad_cols[
                :, :, :, i, j, :
            ]
    grad_x = grad_padded[:, padding : padding + height, padding : padding + width, :]
    return grad_x, (grad_kernel, grad_bias)


def _pool_argmax(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    # Row-major scan inside each window; argmax keeps the first maximum.
    windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    n, out_h, out_w, c = windows.shape[:4]
    return windows.reshape(n, out_h, out_w, c, k * k).argmax(axis=-1)


def maxpool2d_forward(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    windows = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    n, out_h, out_w, c = windows.shape[:4]
    return windows.reshape(n, out_h, out_w, c, k * k).max(axis=-1)


def maxpool2d_backward(x: np.ndarray, grad_out: np.ndarray, k: int, stride: int) -> np.ndarray:
    arg = _pool_argmax(x, k, stride)
    n, out_h, out_w, c = arg.shape
    nn_idx, hh, ww, cc = np.indices((n, out_h, out_w, c), sparse=False)
    rows = hh * stride + arg // k
    cols = ww * stride + arg % k
    grad_x = np.zeros_like(x, dtype=grad_out.dtype)
    np.add.at(grad_x, (nn_idx, rows, cols, cc), grad_out)
    return grad_x


def dense_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return x @ kernel.T + bias


def dense_backward(x: np.ndarray, grad_out: np.ndarray, kernel: np.ndarray) -> tuple[np.ndarray, WeightGrads]:
    return grad_out @ kernel, (grad_out.T @ x, grad_out.sum(axis=0))


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max."""
    shifted = x - x.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def layer_forward(layer: LayerSpec, weights: tuple[np.ndarray, ...], x: np.ndarray) -> np.ndarray:
    """Apply one layer to a batch."""
    match layer.kind:
        case "conv2d":
            return conv2d_forward(x, weights[0], weights[1], layer.effective_stride, layer.padding)
        case "maxpool2d":
            return maxpool2d_forward(x, int(layer.kernel_size or 1), layer.effective_stride)
        case "flatten":
            return x.reshape(x.shape[0], -1)
        case "dense":
            return dense_forward(x, weights[0], weights[1])
        case "relu":
            return np.maximum(x, 0)
        case "softmax":
            return softmax(x)
    raise AssertionError(f"unhandled layer kind {layer.kind}")


def layer_backward(
    layer: LayerSpec,
    weights: tuple[np.ndarray, ...],
    x: np.ndarray,
    y: np.ndarray,
    grad_out: np.ndarray,
) -> tuple[np.ndarray, WeightGrads]:
    """Gradient of one layer given its input x, output y and upstream gradient."""
    match layer.kind:
        case "conv2d":
            return conv2d_backward(x, grad_out, weights[0], layer.effective_stride, layer.padding)
        case "maxpool2d":
            return maxpool2d_backward(x, grad_out, int(layer.kernel_size or 1), layer.effective_stride), ()
        case "flatten":
            return grad_out.reshape(x.shape), ()
        case "dense":
            return dense_backward(x, grad_out, weights[0])
        case "relu":
            return grad_out * (x > 0), ()
        case "softmax":
            return y * (grad_out - (grad_out * y).sum(axis=-1, keepdims=True)), ()
    raise AssertionError(f"unhandled layer kind {layer.kind}")
