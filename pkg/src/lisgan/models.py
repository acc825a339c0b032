"""Generator (with LIS modules), discriminator and reverser networks.

Networks are described declaratively by a :class:`NetworkSpec` (an ordered
list of :class:`LayerSpec` records plus geometry), validated at build time,
and instantiated into :class:`NetworkParams` by :func:`build_network`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .nn import layers as L
from .nn.layers import LayerParams, ShapeError
from .nn.tensor import Tensor, as_tensor

ROLES = ("generator", "discriminator", "reverser")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    wn: str = "none"
    meta: tuple = ()  # sorted (key, value) pairs; kept hashable

    @classmethod
    def make(cls, kind: str, wn: str = "none", **meta) -> LayerSpec:
        return cls(kind, wn, tuple(sorted(meta.items())))

    @property
    def params(self) -> dict:
        return dict(self.meta)


@dataclass
class NetworkSpec:
    role: str
    layers: list[LayerSpec]
    n_z: int
    geometry: tuple[int, ...]
    n_r: int = 0
    preset: str = "custom"

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.n_z,) if self.role == "generator" else tuple(self.geometry)

    @property
    def output_shape(self) -> tuple[int, ...]:
        return {"generator": tuple(self.geometry), "discriminator": (1,), "reverser": (self.n_z,)}[self.role]

    def describe(self) -> dict:
        rates = [ls.params["rate"] for ls in self.layers if ls.kind == "dropout"]
        return {"role": self.role, "preset": self.preset, "n_z": self.n_z, "n_r": self.n_r,
                "geometry": list(self.geometry), "dropout": rates[0] if rates else 0.0}


@dataclass
class LISModuleParams:
    fc1: LayerParams
    act: LayerParams
    fc2: LayerParams

    def layers(self) -> list[LayerParams]:
        return [self.fc1, self.act, self.fc2]


@dataclass
class NoiseBatch:
    """An m x N_z batch of noise vectors tagged with where it came from.

    ``source`` is "prior" for freshly sampled vectors, "lis" for LIS module
    outputs and "reverser" for reverser outputs; ``index`` is the 1-based
    module or iteration number (0 for the prior).
    """

    values: Tensor
    source: str = "prior"
    index: int = 0

    def __post_init__(self):
        self.values = as_tensor(self.values)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError(f"noise batch must be m x N_z with m >= 1, got {self.values.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def data(self) -> np.ndarray:
        return self.values.data


@dataclass
class NetworkParams:
    spec: NetworkSpec
    layers: list[LayerParams]
    lis: list[LISModuleParams] = field(default_factory=list)

    @property
    def role(self) -> str:
        return self.spec.role

    def all_layers(self) -> Iterator[LayerParams]:
        for module in self.lis:
            yield from module.layers()
        yield from self.layers

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for layer in self.all_layers():
            out.extend(layer.named_parameters())
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.parameters()))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        named = dict(self.named_parameters())
        if set(named) != set(arrays):
            missing = sorted(set(named) ^ set(arrays))
            raise SpecError(f"parameter names do not match network: {missing[:5]}")
        for name, t in named.items():
            arr = arrays[name]
            if arr.shape != t.shape:
                raise SpecError(f"{name}: stored shape {arr.shape} != network shape {t.shape}")
            t.data = arr.astype(t.dtype).copy()

    def astype(self, dtype) -> NetworkParams:
        for t in self.parameters():
            t.data = t.data.astype(dtype)
        return self


# -- spec validation and building ------------------------------------------

def _probe_layer(spec: LayerSpec, index: int) -> LayerParams:
    meta = spec.params
    name = f"l{index}.{spec.kind}"
    if spec.kind == "tprelu":
        meta.setdefault("channels", 0)
    return LayerParams(spec.kind, name=name, wn=spec.wn, meta=meta)


def validate_spec(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Walk the layer chain and return per-layer output shapes.

    Raises SpecError naming the first offending layer.
    """
    if spec.role not in ROLES:
        raise SpecError(f"unknown role {spec.role!r}")
    if spec.n_z < 1:
        raise SpecError("n_z must be >= 1")
    if spec.n_r < 0 or (spec.n_r and spec.role != "generator"):
        raise SpecError("only generators carry LIS modules (n_r >= 0)")
    shape = spec.input_shape
    shapes = []
    for i, ls in enumerate(spec.layers):
        try:
            shape = L.output_shape(_probe_layer(ls, i), shape)
        except ShapeError as exc:
            raise SpecError(f"{spec.role} layer {i} ({ls.kind}): {exc}") from None
        except (KeyError, ValueError) as exc:
            raise SpecError(f"{spec.role} layer {i} ({ls.kind}): bad metadata ({exc})") from None
        shapes.append(shape)
    if shape != spec.output_shape:
        raise SpecError(f"{spec.role} output shape {shape} != required {spec.output_shape}")
    if spec.role == "discriminator" and (not spec.layers or spec.layers[-1].kind != "sigmoid"):
        raise SpecError("discriminator must end in a sigmoid unit")
    return shapes


def build_network(spec: NetworkSpec, seed: int) -> NetworkParams:
    validate_spec(spec)
    rng = np.random.default_rng(seed)
    lis = []
    for i in range(spec.n_r):
        prefix = f"lis{i + 1}"
        lis.append(LISModuleParams(
            fc1=L.fc_layer(spec.n_z, spec.n_z, wn="standard", rng=rng, name=f"{prefix}.fc1"),
            act=L.tprelu_layer(spec.n_z, name=f"{prefix}.act"),
            fc2=L.fc_layer(spec.n_z, spec.n_z, wn="none", rng=rng, name=f"{prefix}.fc2", zero=True),
        ))
    layers = []
    for i, ls in enumerate(spec.layers):
        m = ls.params
        name = f"l{i}"
        if ls.kind == "fc":
            layer = L.fc_layer(m["in"], m["out"], wn=ls.wn, rng=rng, name=name)
        elif ls.kind in ("conv", "deconv"):
            layer = L.conv_layer(m["in"], m["out"], m["kernel"], m["stride"], m["pad"], wn=ls.wn,
                                 rng=rng, name=name, transposed=ls.kind == "deconv")
        elif ls.kind == "tprelu":
            layer = L.tprelu_layer(m["channels"], name=name)
        else:
            layer = LayerParams(ls.kind, name=name, meta=m)
        layers.append(layer)
    return NetworkParams(spec, layers, lis)


# -- forward passes ---------------------------------------------------------

def run_layers(layers, x, training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    for layer in layers:
        x = L.forward(layer, x, training, rng)
    return x


def lis_forward(module: LISModuleParams, z: NoiseBatch, index: int = 1) -> NoiseBatch:
    """z' = z + fc2(tprelu(wn_fc1(z)))."""
    n_z = module.fc1.meta["in"]
    if z.shape[1] != n_z:
        raise ShapeError(f"LIS module {index}: expected N_z={n_z}, got noise batch {z.shape}")
    h = run_layers(module.layers(), z.values)
    return NoiseBatch(z.values + h, source="lis", index=index)


def generator_forward(gen: NetworkParams, z: NoiseBatch, k: int | None = None,
                      training: bool = False, rng=None) -> tuple[Tensor, list[NoiseBatch]]:
    """Run the first ``k`` LIS modules (default all) and the generator tail.

    Returns the generated batch and the intermediate z'_1..z'_k.
    """
    if gen.role != "generator":
        raise SpecError(f"expected a generator, got {gen.role}")
    k = len(gen.lis) if k is None else k
    if not 0 <= k <= len(gen.lis):
        raise ValueError(f"k={k} outside [0, {len(gen.lis)}]")
    if not isinstance(z, NoiseBatch):
        z = NoiseBatch(z)
    if z.shape[1] != gen.spec.n_z:
        raise ShapeError(f"generator: expected N_z={gen.spec.n_z}, got noise batch {z.shape}")
    outs = []
    cur = z
    for i in range(k):
        cur = lis_forward(gen.lis[i], cur, index=i + 1)
        outs.append(cur)
    return run_layers(gen.layers, cur.values, training, rng), outs


def _check_geometry(net: NetworkParams, x: Tensor) -> None:
    want = tuple(net.spec.geometry)
    if tuple(x.shape[1:]) != want:
        raise ShapeError(f"{net.role}: expected samples of shape {want}, got batch {x.shape}")


def discriminator_forward(disc: NetworkParams, x, training: bool = False, rng=None) -> Tensor:
    """Ratings in (0, 1), one per example, shape (m,)."""
    x = as_tensor(x)
    _check_geometry(disc, x)
    out = run_layers(disc.layers, x, training, rng)
    return out.reshape((x.shape[0],))


def reverser_forward(rev: NetworkParams, x, training: bool = False, rng=None, index: int = 0) -> NoiseBatch:
    x = as_tensor(x)
    _check_geometry(rev, x)
    out = run_layers(rev.layers, x, training, rng)
    return NoiseBatch(out.reshape((x.shape[0], rev.spec.n_z)), source="reverser", index=index)


# -- presets ----------------------------------------------------------------

def _fc(n_in, n_out, wn="standard"):
    return LayerSpec.make("fc", wn, **{"in": n_in, "out": n_out})


def _conv(c_in, c_out, kernel, stride, pad, wn="standard", transposed=False):
    return LayerSpec.make("deconv" if transposed else "conv", wn,
                          **{"in": c_in, "out": c_out, "kernel": kernel, "stride": stride, "pad": pad})


def _act(channels):
    return LayerSpec.make("tprelu", channels=channels)


def _drop(rate):
    return [LayerSpec.make("dropout", rate=rate)] if rate > 0 else []


def conv_generator_spec(n_z, n_r, base, filters, geometry, preset="custom") -> NetworkSpec:
    c0, h0, w0 = base
    layers = [_fc(n_z, c0 * h0 * w0), _act(c0 * h0 * w0), LayerSpec.make("reshape", shape=(c0, h0, w0))]
    prev = c0
    for f in filters:
        layers += [_conv(prev, f, 4, 2, 1, transposed=True), _act(f)]
        prev = f
    layers += [_conv(prev, geometry[0], 4, 2, 1, wn="affine", transposed=True), LayerSpec.make("sigmoid")]
    return NetworkSpec("generator", layers, n_z, tuple(geometry), n_r, preset)


def conv_critic_spec(role, n_z, geometry, filters, final_kernel, dropout=0.0, preset="custom") -> NetworkSpec:
    layers = []
    prev = geometry[0]
    for i, f in enumerate(filters):
        layers += [_conv(prev, f, 4, 2, 1), _act(f)]
        if i < len(filters) - 1:
            layers += _drop(dropout)
        prev = f
    out = 1 if role == "discriminator" else n_z
    layers += _drop(dropout)
    layers.append(_conv(prev, out, final_kernel, 1, 0, wn="affine"))
    layers.append(LayerSpec.make("reshape", shape=(out,)))
    if role == "discriminator":
        layers.append(LayerSpec.make("sigmoid"))
    return NetworkSpec(role, layers, n_z, tuple(geometry), 0, preset)


def point_generator_spec(n_z, n_r, dim=2, widths=(64, 64), preset="ring2d") -> NetworkSpec:
    layers = []
    prev = n_z
    for w in widths:
        layers += [_fc(prev, w), _act(w)]
        prev = w
    layers.append(_fc(prev, dim, wn="affine"))
    return NetworkSpec("generator", layers, n_z, (dim,), n_r, preset)


def point_critic_spec(role, n_z, dim=2, widths=(64, 64), dropout=0.0, preset="ring2d") -> NetworkSpec:
    layers = []
    prev = dim
    for w in widths:
        layers += [_fc(prev, w), _act(w)] + _drop(dropout)
        prev = w
    if role == "discriminator":
        layers += [_fc(prev, 1, wn="affine"), LayerSpec.make("sigmoid")]
    else:
        layers.append(_fc(prev, n_z, wn="affine"))
    return NetworkSpec(role, layers, n_z, (dim,), 0, preset)


PRESETS = ("ring2d", "desk16", "full80", "full160")


def preset_specs(name: str, n_z: int | None = None, n_r: int = 0, dropout: float = 0.0,
                 channels: int | None = None) -> dict[str, NetworkSpec]:
    """Generator, discriminator and reverser specs for a named preset.

    ``desk16`` keeps the 80x80 tables' structure at 16x16 with filter
    counts divided by 8; ``full80``/``full160`` are the full-size tables.
    """
    if name == "ring2d":
        n_z = n_z or 2
        return {
            "generator": point_generator_spec(n_z, n_r, preset=name),
            "discriminator": point_critic_spec("discriminator", n_z, preset=name),
            "reverser": point_critic_spec("reverser", n_z, widths=(32, 32), dropout=dropout, preset=name),
        }
    if name == "desk16":
        n_z = n_z or 32
        geom = (channels or 1, 16, 16)
        return {
            "generator": conv_generator_spec(n_z, n_r, (64, 4, 4), [32], geom, preset=name),
            "discriminator": conv_critic_spec("discriminator", n_z, geom, [8, 16, 32], 2, preset=name),
            "reverser": conv_critic_spec("reverser", n_z, geom, [4, 8, 16], 2, dropout=dropout, preset=name),
        }
    if name == "full80":
        n_z = n_z or 256
        geom = (channels or 3, 80, 80)
        return {
            "generator": conv_generator_spec(n_z, n_r, (512, 5, 5), [256, 128, 64], geom, preset=name),
            "discriminator": conv_critic_spec("discriminator", n_z, geom, [64, 128, 256, 512], 5, preset=name),
            "reverser": conv_critic_spec("reverser", n_z, geom, [32, 64, 128, 256], 5, dropout=dropout,
                                         preset=name),
        }
    if name == "full160":
        n_z = n_z or 256
        geom = (channels or 3, 160, 160)
        return {
            "generator": conv_generator_spec(n_z, n_r, (1024, 5, 5), [512, 256, 128, 64], geom, preset=name),
            "discriminator": conv_critic_spec("discriminator", n_z, geom, [64, 128, 256, 512, 1024], 5,
                                              preset=name),
            "reverser": conv_critic_spec("reverser", n_z, geom, [32, 64, 128, 256, 512], 5, dropout=dropout,
                                         preset=name),
        }
    raise SpecError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def spec_from_description(desc: dict) -> NetworkSpec:
    """Rebuild a preset spec from :meth:`NetworkSpec.describe` output."""
    dropout = desc.get("dropout", 0.0)
    geom = desc.get("geometry") or [None]
    channels = geom[0] if len(geom) == 3 else None
    specs = preset_specs(desc["preset"], desc["n_z"], desc.get("n_r", 0), dropout, channels)
    return specs[desc["role"]]


def r_separate_generate(gen: NetworkParams, rev: NetworkParams, z: NoiseBatch, k: int | None = None) -> Tensor:
    """Final R-separate samples G(R(G(z)))."""
    first, _ = generator_forward(gen, z, k)
    z_rec = reverser_forward(rev, first)
    out, _ = generator_forward(gen, z_rec, k)
    return out
