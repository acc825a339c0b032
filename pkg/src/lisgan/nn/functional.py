"""Differentiable layer primitives with hand-written backward passes."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, _make, as_tensor


def weight_norm(v: Tensor, g: Tensor, unit_axis: int) -> Tensor:
    """w = g * v / ||v||, with one norm (and one g) per slice along ``unit_axis``."""
    vd = v.data
    axes = tuple(i for i in range(vd.ndim) if i != unit_axis)
    bshape = [1] * vd.ndim
    bshape[unit_axis] = vd.shape[unit_axis]
    norm = np.sqrt((vd * vd).sum(axis=axes, keepdims=True))
    u = vd / norm
    gd = g.data.reshape(bshape)

    def backward(grad):
        gu = (grad * u).sum(axis=axes, keepdims=True)
        dv = (gd / norm) * (grad - u * gu)
        return dv, gu.reshape(g.shape)

    return _make(gd * u, (v, g), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """y = x @ w.T (+ b), with w of shape (out, in)."""
    xd, wd = x.data, w.data
    out = xd @ wd.T
    parents: tuple = (x, w)
    if b is not None:
        out = out + b.data
        parents = (x, w, b)

    def backward(g):
        grads = [g @ wd, g.T @ xd]
        if b is not None:
            grads.append(g.sum(axis=0))
        return grads

    return _make(out, parents, backward)


def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    # x (N, C, H, W), w (O, C, k, k) -> (N, O, Ho, Wo)
    k = w.shape[2]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (x.shape[2] - k) // stride + 1
    wo = (x.shape[3] - k) // stride + 1
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _conv_input_grad(g: np.ndarray, w: np.ndarray, stride: int, pad: int, in_hw: tuple[int, int]) -> np.ndarray:
    # adjoint of _conv_forward w.r.t. x; g (N, O, Ho, Wo) -> (N, C, H, W)
    n, _, ho, wo = g.shape
    c, k = w.shape[1], w.shape[2]
    h, wd = in_hw
    cols = np.tensordot(g, w, axes=([1], [0]))  # (N, Ho, Wo, C, k, k)
    cols = cols.transpose(0, 3, 4, 5, 1, 2)  # (N, C, k, k, Ho, Wo)
    hp, wp = h + 2 * pad, wd + 2 * pad
    # windows may overhang when (Hp - k) is not a multiple of stride
    hp = max(hp, (ho - 1) * stride + k)
    wp = max(wp, (wo - 1) * stride + k)
    dx = np.zeros((n, c, hp, wp), dtype=g.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return dx[:, :, pad:pad + h, pad:pad + wd]


def _conv_weight_grad(x: np.ndarray, g: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = g.shape[2], g.shape[3]
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    return np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, k, k)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """Strided cross-correlation. x: (N, C, H, W), w: (O, C, k, k)."""
    xd, wd = x.data, w.data
    out = _conv_forward(xd, wd, stride, pad)
    parents: tuple = (x, w)
    if b is not None:
        out = out + b.data.reshape(1, -1, 1, 1)
        parents = (x, w, b)

    def backward(g):
        grads = [
            _conv_input_grad(g, wd, stride, pad, xd.shape[2:]),
            _conv_weight_grad(xd, g, wd.shape[2], stride, pad),
        ]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return _make(out, parents, backward)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """Fractionally strided convolution. x: (N, Cin, H, W), w: (Cin, Cout, k, k).

    Output spatial size is (H - 1) * stride - 2 * pad + k.
    """
    xd, wd = x.data, w.data
    k = wd.shape[2]
    h_out = (xd.shape[2] - 1) * stride - 2 * pad + k
    w_out = (xd.shape[3] - 1) * stride - 2 * pad + k
    out = _conv_input_grad(xd, wd, stride, pad, (h_out, w_out))
    parents: tuple = (x, w)
    if b is not None:
        out = out + b.data.reshape(1, -1, 1, 1)
        parents = (x, w, b)

    def backward(g):
        grads = [
            _conv_forward(g, wd, stride, pad),
            _conv_weight_grad(g, xd, k, stride, pad),
        ]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return _make(out, parents, backward)


def tprelu(x: Tensor, a: Tensor, t: Tensor) -> Tensor:
    """Thresholded PReLU, per channel (axis 1): t + max(0, x - t) + a * min(0, x - t)."""
    xd = x.data
    bshape = (1, -1) + (1,) * (xd.ndim - 2)
    ad = a.data.reshape(bshape)
    td = t.data.reshape(bshape)
    d = xd - td
    pos = d > 0
    neg_part = np.where(pos, 0, d)
    out = np.where(pos, xd, td + ad * d)
    red = (0,) + tuple(range(2, xd.ndim))

    def backward(g):
        slope = np.where(pos, 1.0, ad).astype(g.dtype)
        dx = g * slope
        da = (g * neg_part).sum(axis=red)
        dt = (g * (1.0 - slope)).sum(axis=red)
        return dx, da, dt

    return _make(out, (x, a, t), backward)


def channel_dropout_mask(shape: tuple[int, ...], rate: float, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Inverted-dropout multiplier constant over each (example, channel) slice."""
    keep = rng.random((shape[0], shape[1])) >= rate
    mask = keep.astype(dtype) / dtype(1.0 - rate)
    return mask.reshape(shape[:2] + (1,) * (len(shape) - 2))


def spatial_dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if x.ndim < 2:
        raise ValueError(f"spatial dropout needs a channel axis, got shape {x.shape}")
    if rng is None:
        raise ValueError("spatial dropout in training mode needs an rng")
    mask = channel_dropout_mask(x.shape, rate, rng, x.dtype.type)
    return _make(x.data * mask, (x,), lambda g: (g * mask,))
