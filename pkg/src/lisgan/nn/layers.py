"""Parameterized layers used by the generator, discriminator and reverser.

Each layer is a :class:`LayerParams` record (kind, weight-norm flag, static
metadata and parameter tensors); :func:`forward` dispatches on ``kind``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from .tensor import Tensor, as_tensor, reshape, sigmoid

KINDS = ("fc", "conv", "deconv", "tprelu", "sigmoid", "dropout", "reshape")
WN_FLAGS = ("none", "standard", "affine")

INIT_STD = 0.05
TPRELU_SLOPE_INIT = 0.25


class ShapeError(ValueError):
    pass


@dataclass
class LayerParams:
    kind: str
    name: str = ""
    wn: str = "none"
    meta: dict = field(default_factory=dict)
    params: dict[str, Tensor] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.wn not in WN_FLAGS:
            raise ValueError(f"unknown weight-norm flag {self.wn!r}")

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{self.name}.{k}", v) for k, v in self.params.items()]


def _param(arr: np.ndarray, name: str) -> Tensor:
    return Tensor(arr.astype(np.float32), requires_grad=True, name=name)


def _unit_axis(kind: str) -> int:
    # deconv weights are stored (Cin, Cout, k, k); output units are axis 1
    return 1 if kind == "deconv" else 0


def _weight_params(layer: LayerParams, shape: tuple[int, ...], rng: np.random.Generator, zero: bool) -> None:
    n_units = shape[_unit_axis(layer.kind)]
    if layer.wn == "none":
        w = np.zeros(shape) if zero else rng.normal(0.0, INIT_STD, shape)
        layer.params["w"] = _param(w, f"{layer.name}.w")
        layer.params["b"] = _param(np.zeros(n_units), f"{layer.name}.b")
        return
    v = rng.normal(0.0, INIT_STD, shape)
    axes = tuple(i for i in range(len(shape)) if i != _unit_axis(layer.kind))
    g = np.sqrt((v * v).sum(axis=axes))
    layer.params["v"] = _param(v, f"{layer.name}.v")
    layer.params["g"] = _param(g, f"{layer.name}.g")
    if layer.wn == "affine":
        layer.params["b"] = _param(np.zeros(n_units), f"{layer.name}.b")


def fc_layer(n_in: int, n_out: int, wn: str = "standard", rng=None, name: str = "fc", zero: bool = False) -> LayerParams:
    layer = LayerParams("fc", name=name, wn=wn, meta={"in": n_in, "out": n_out})
    _weight_params(layer, (n_out, n_in), rng if rng is not None else np.random.default_rng(0), zero)
    return layer


def conv_layer(c_in: int, c_out: int, kernel: int, stride: int, pad: int, wn: str = "standard",
               rng=None, name: str = "conv", transposed: bool = False) -> LayerParams:
    kind = "deconv" if transposed else "conv"
    layer = LayerParams(kind, name=name, wn=wn,
                        meta={"in": c_in, "out": c_out, "kernel": kernel, "stride": stride, "pad": pad})
    shape = (c_in, c_out, kernel, kernel) if transposed else (c_out, c_in, kernel, kernel)
    _weight_params(layer, shape, rng if rng is not None else np.random.default_rng(0), False)
    return layer


def tprelu_layer(channels: int, name: str = "tprelu") -> LayerParams:
    layer = LayerParams("tprelu", name=name, meta={"channels": channels})
    layer.params["a"] = _param(np.full(channels, TPRELU_SLOPE_INIT), f"{name}.a")
    layer.params["t"] = _param(np.zeros(channels), f"{name}.t")
    return layer


def effective_weight(layer: LayerParams) -> Tensor:
    if layer.wn == "none":
        return layer.params["w"]
    return F.weight_norm(layer.params["v"], layer.params["g"], _unit_axis(layer.kind))


def _reject(layer: LayerParams, expected, got) -> None:
    raise ShapeError(f"layer {layer.name or layer.kind!r} ({layer.kind}): expected input shape {expected}, got {got}")


def output_shape(layer: LayerParams, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Per-example output shape (no batch axis); raises ShapeError on mismatch."""
    m = layer.meta
    if layer.kind == "fc":
        if in_shape != (m["in"],):
            _reject(layer, (m["in"],), in_shape)
        return (m["out"],)
    if layer.kind in ("conv", "deconv"):
        if len(in_shape) != 3 or in_shape[0] != m["in"]:
            _reject(layer, (m["in"], "H", "W"), in_shape)
        k, s, p = m["kernel"], m["stride"], m["pad"]
        if layer.kind == "conv":
            h = (in_shape[1] + 2 * p - k) // s + 1
            w = (in_shape[2] + 2 * p - k) // s + 1
            if in_shape[1] + 2 * p < k or in_shape[2] + 2 * p < k:
                _reject(layer, f"spatial >= {k - 2 * p}", in_shape)
        else:
            h = (in_shape[1] - 1) * s - 2 * p + k
            w = (in_shape[2] - 1) * s - 2 * p + k
        return (m["out"], h, w)
    if layer.kind == "tprelu":
        if not in_shape or in_shape[0] != m["channels"]:
            _reject(layer, (m["channels"], "..."), in_shape)
        return in_shape
    if layer.kind == "reshape":
        target = tuple(m["shape"])
        if int(np.prod(in_shape)) != int(np.prod(target)):
            _reject(layer, f"{int(np.prod(target))} elements", in_shape)
        return target
    return in_shape


def forward(layer: LayerParams, x, training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Apply one layer to a batch (leading axis is the batch)."""
    x = as_tensor(x)
    output_shape(layer, tuple(x.shape[1:]))
    kind = layer.kind
    p = layer.params
    if kind == "fc":
        return F.linear(x, effective_weight(layer), p.get("b"))
    if kind == "conv":
        m = layer.meta
        return F.conv2d(x, effective_weight(layer), p.get("b"), stride=m["stride"], pad=m["pad"])
    if kind == "deconv":
        m = layer.meta
        return F.conv_transpose2d(x, effective_weight(layer), p.get("b"), stride=m["stride"], pad=m["pad"])
    if kind == "tprelu":
        return F.tprelu(x, p["a"], p["t"])
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "dropout":
        return F.spatial_dropout(x, layer.meta["rate"], training, rng)
    return reshape(x, (x.shape[0],) + tuple(layer.meta["shape"]))
