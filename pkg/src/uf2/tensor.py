"""Dense tensor kernels.

Tensors are plain row-major ``numpy.ndarray`` values. Every function here is
pure: inputs are never written to and a fresh array is returned.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import ConfigError, NumericError, ShapeError

Tensor = np.ndarray

_SQRT2 = np.sqrt(2.0)


def _float(x) -> np.ndarray:
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return arr


def check_tensor(x: Tensor, name: str = "tensor") -> None:
    """Raise ShapeError unless every dimension of ``x`` is at least 1."""
    if any(d < 1 for d in np.shape(x)):
        raise ShapeError(f"{name}: all dimensions must be >= 1, got {np.shape(x)}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _float(a), _float(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax_lastdim(x: Tensor) -> Tensor:
    """Softmax over the last axis with max subtraction."""
    x = _float(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ShapeError(f"softmax_lastdim: need a non-empty last axis, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("softmax_lastdim: non-finite input")
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_channels(op: str, x: Tensor, *vecs: Tensor) -> None:
    c = x.shape[-1]
    for v in vecs:
        if np.shape(v) != (c,):
            raise ShapeError(f"{op}: expected per-channel vector of shape ({c},), got {np.shape(v)}")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    if eps <= 0:
        raise ConfigError("layer_norm: eps must be positive")
    x = _float(x)
    _check_channels("layer_norm", x, gamma, beta)
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def batch_norm_infer(
    x: Tensor,
    mean: Tensor,
    var: Tensor,
    gamma: Tensor,
    beta: Tensor,
    eps: float = 1e-5,
) -> Tensor:
    """Inference-mode batch norm using supplied running statistics."""
    if eps <= 0:
        raise ConfigError("batch_norm_infer: eps must be positive")
    x = _float(x)
    _check_channels("batch_norm_infer", x, mean, var, gamma, beta)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def gelu(x: Tensor) -> Tensor:
    """Exact GeLU, ``x * Phi(x)``."""
    x = _float(x)
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def depthwise_conv_temporal(x: Tensor, kernel: Tensor) -> Tensor:
    """Per-channel convolution along axis 0 of a ``T x S x C`` tensor.

    ``kernel`` is ``t x C`` with ``t`` odd; out-of-range taps read zero, so the
    output has the input's shape.
    """
    x = _float(x)
    if x.ndim != 3 or kernel.ndim != 2 or kernel.shape[1] != x.shape[2]:
        raise ShapeError(f"depthwise_conv_temporal: bad shapes x={x.shape} kernel={kernel.shape}")
    t = kernel.shape[0]
    if t % 2 == 0:
        raise ConfigError(f"depthwise_conv_temporal: tube length must be odd, got {t}")
    half = t // 2
    T = x.shape[0]
    padded = np.zeros((T + 2 * half,) + x.shape[1:], dtype=np.result_type(x, kernel))
    padded[half : half + T] = x
    out = np.zeros_like(padded[:T])
    for k in range(t):
        # kernel row k is the tap at offset k - half
        out += kernel[k] * padded[k : k + T]
    return out


def depthwise_conv3d(x: Tensor, kernel: Tensor) -> Tensor:
    """Per-channel 3D convolution of a ``T x H x W x C`` tensor, zero "same" padding."""
    x = _float(x)
    if x.ndim != 4 or kernel.ndim != 4 or kernel.shape[3] != x.shape[3]:
        raise ShapeError(f"depthwise_conv3d: bad shapes x={x.shape} kernel={kernel.shape}")
    kt, kh, kw = kernel.shape[:3]
    if kt % 2 == 0 or kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError(f"depthwise_conv3d: kernel dims must be odd, got {kernel.shape[:3]}")
    pt, ph, pw = kt // 2, kh // 2, kw // 2
    T, H, W, _ = x.shape
    padded = np.pad(x, ((pt, pt), (ph, ph), (pw, pw), (0, 0)))
    out = np.zeros(x.shape, dtype=np.result_type(x, kernel))
    for a in range(kt):
        for b in range(kh):
            for c in range(kw):
                out += kernel[a, b, c] * padded[a : a + T, b : b + H, c : c + W]
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map on the last axis; ``w`` is ``Cin x Cout``."""
    x = _float(x)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    y = x @ w
    if b is not None:
        if np.shape(b) != (w.shape[1],):
            raise ShapeError(f"linear: bias {np.shape(b)} does not match weight {w.shape}")
        y = y + b
    return y
