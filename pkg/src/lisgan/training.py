"""Training procedures: baseline GAN, R-separate, R-iterative and G-LIS.

Every run owns independent RNG streams (noise, data, schedule, dropout)
spawned from one seed, so identical (config, seed) pairs replay exactly
and logging cadence never perturbs training.
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import losses, schedules
from .data import CorpusSource, MixtureSource, load_image_corpus, ring_mixture
from .losses import LambdaSchedule
from .metrics import MetricsSink, metric_columns
from .models import (NetworkParams, NoiseBatch, build_network, discriminator_forward, generator_forward,
                     preset_specs, reverser_forward, run_layers)
from .nn.optim import RMSprop
from .nn.tensor import NonFiniteError, Tensor, no_grad

log = logging.getLogger(__name__)

ARCHITECTURES = ("baseline", "r-separate", "r-iterative", "g-lis")
PRIORS = ("standard-normal", "uniform")
DATASETS = ("ring", "images")

_STREAMS = ("noise", "data", "schedule", "dropout")
_INIT = ("generator", "discriminator", "reverser")


class TrainingAborted(RuntimeError):
    """A loss or gradient went non-finite; ``state`` holds the last-good parameters."""

    def __init__(self, message: str, state: RunState):
        super().__init__(message)
        self.state = state


@dataclass
class TrainConfig:
    architecture: str = "g-lis"
    n_r: int = 1
    lambda_r: float = 0.9
    batch_size: int = 32
    phases: list[tuple[int, float]] = field(default_factory=lambda: [(20000, 5e-4)])
    prior: str = "standard-normal"
    seed: int = 0
    g_loss_mode: str = "minimax"
    dropout: float = 0.0
    dataset: str = "ring"
    image_dir: str = ""
    preset: str = "ring2d"
    n_z: int = 0
    ring_modes: int = 8
    ring_radius: float = 2.0
    ring_std: float = 0.02
    log_every: int = 100
    checkpoint_every: int = 0
    reverser_batches: int = 2500
    reverser_lr: float = 5e-4
    eval_samples: int = 2000

    def validate(self) -> TrainConfig:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.n_r < 0:
            raise ValueError("n_r must be >= 0")
        if self.n_r == 0 and self.architecture not in ("baseline", "g-lis"):
            raise ValueError(f"n_r = 0 is only valid for baseline or g-lis, not {self.architecture}")
        if not 0.0 <= self.lambda_r <= 1.0:
            raise ValueError("lambda_r must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.phases:
            raise ValueError("phases must not be empty")
        for n, lr in self.phases:
            if n < 0 or lr <= 0:
                raise ValueError(f"bad phase ({n}, {lr}): batches must be >= 0 and lr > 0")
        if self.prior not in PRIORS:
            raise ValueError(f"prior must be one of {PRIORS}")
        if self.g_loss_mode not in losses.G_LOSS_MODES:
            raise ValueError(f"g_loss_mode must be one of {losses.G_LOSS_MODES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        return self

    @property
    def total_batches(self) -> int:
        return int(sum(n for n, _ in self.phases))

    def lr_at(self, batch: int) -> float:
        seen = 0
        for n, lr in self.phases:
            seen += n
            if batch < seen:
                return lr
        return self.phases[-1][1]

    @property
    def n_lis(self) -> int:
        return self.n_r if self.architecture == "g-lis" else 0


@dataclass
class RunState:
    config: TrainConfig
    source: object
    gen: NetworkParams
    disc: NetworkParams
    rev: NetworkParams | None
    opt_g: RMSprop
    opt_d: RMSprop
    opt_r: RMSprop | None
    rngs: dict[str, np.random.Generator]
    schedule: LambdaSchedule
    batch: int = 0
    metrics: list[dict] = field(default_factory=list)
    sink: MetricsSink | None = None
    flags: dict = field(default_factory=dict)
    g_updates: int = 0


# -- helpers ---------------------------------------------------------------

def seed_streams(seed: int) -> tuple[dict[str, np.random.Generator], dict[str, int]]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS) + len(_INIT))
    rngs = {name: np.random.default_rng(children[i]) for i, name in enumerate(_STREAMS)}
    inits = {name: int(children[len(_STREAMS) + i].generate_state(1)[0]) for i, name in enumerate(_INIT)}
    return rngs, inits


def sample_noise(m: int, n_z: int, prior: str, rng: np.random.Generator) -> NoiseBatch:
    if m < 1 or n_z < 1:
        raise ValueError("m and n_z must be >= 1")
    if prior == "standard-normal":
        vals = rng.standard_normal((m, n_z), dtype=np.float32)
    elif prior == "uniform":
        vals = rng.uniform(-1.0, 1.0, (m, n_z)).astype(np.float32)
    else:
        raise ValueError(f"unknown prior {prior!r}")
    return NoiseBatch(Tensor(vals), source="prior")


def make_source(config: TrainConfig):
    if config.dataset == "ring":
        return MixtureSource(ring_mixture(config.ring_modes, config.ring_radius, config.ring_std))
    specs = preset_specs(config.preset, config.n_z or None)
    return CorpusSource(load_image_corpus(config.image_dir, specs["generator"].geometry))


def network_specs(config: TrainConfig, source=None) -> dict:
    channels = None
    geom = getattr(source, "geometry", None)
    if geom is not None and len(geom) == 3:
        channels = geom[0]
    return preset_specs(config.preset, config.n_z or None, config.n_lis, config.dropout, channels)


def build_run(config: TrainConfig, source=None, sink_path=None) -> RunState:
    config.validate()
    source = source if source is not None else make_source(config)
    rngs, inits = seed_streams(config.seed)
    specs = network_specs(config, source)
    if tuple(specs["generator"].geometry) != tuple(source.geometry):
        raise ValueError(f"data geometry {source.geometry} != network geometry {specs['generator'].geometry}")
    gen = build_network(specs["generator"], inits["generator"])
    disc = build_network(specs["discriminator"], inits["discriminator"])
    rev = None
    if config.architecture == "r-iterative":
        specs_r = preset_specs(config.preset, config.n_z or None, 0, 0.0, specs["generator"].geometry[0]
                               if len(specs["generator"].geometry) == 3 else None)
        rev = build_network(specs_r["reverser"], inits["reverser"])
    lr = config.lr_at(0)
    state = RunState(
        config=config, source=source, gen=gen, disc=disc, rev=rev,
        opt_g=RMSprop(gen.parameters(), lr=lr), opt_d=RMSprop(disc.parameters(), lr=lr),
        opt_r=RMSprop(rev.parameters(), lr=lr) if rev is not None else None,
        rngs=rngs, schedule=LambdaSchedule(config.lambda_r),
    )
    if sink_path is not None:
        n_cols = config.n_r if config.architecture in ("g-lis", "r-iterative") else 0
        state.sink = MetricsSink(sink_path, metric_columns(n_cols))
    return state


@contextlib.contextmanager
def frozen(net: NetworkParams):
    """Stop gradients into ``net``'s parameters (inputs still get gradients)."""
    params = net.parameters()
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, f in zip(params, flags):
            p.requires_grad = f


def _check(loss: Tensor, what: str) -> None:
    if not np.isfinite(loss.data).all():
        raise NonFiniteError(f"non-finite {what} loss")


def _grads(loss: Tensor, *nets: NetworkParams) -> None:
    for net in nets:
        net.zero_grad()
    loss.backward()


def _descend(loss: Tensor, net: NetworkParams, opt: RMSprop, what: str) -> None:
    _check(loss, what)
    _grads(loss, net)
    opt.step()


def _d_update(state: RunState, real: np.ndarray, fake: np.ndarray) -> None:
    disc = state.disc
    loss = losses.d_loss(discriminator_forward(disc, real), discriminator_forward(disc, fake), state.flags)
    _descend(loss, disc, state.opt_d, "discriminator")


def _set_lr(state: RunState, lr: float) -> None:
    for opt in (state.opt_g, state.opt_d, state.opt_r):
        if opt is not None:
            opt.lr = lr


# -- per-batch steps -------------------------------------------------------

def _gan_step(state: RunState, z: NoiseBatch, real: np.ndarray, k: int) -> None:
    """One D ascent and one G descent on the same noise batch, running k LIS modules."""
    fake, zs = generator_forward(state.gen, z, k)
    _d_update(state, real, fake.data)
    with frozen(state.disc):
        ratings = discriminator_forward(state.disc, fake)
    adv = losses.g_loss(ratings, state.config.g_loss_mode, state.flags)
    sims = [losses.similarity_loss(z, zi) for zi in zs]
    total = losses.g_lis_total_loss(sims, adv, state.schedule)
    _descend(total, state.gen, state.opt_g, "generator")
    state.g_updates += 1


def g_lis_step(state: RunState) -> tuple[NoiseBatch, np.ndarray]:
    cfg = state.config
    k = schedules.sample_module_count(len(state.gen.lis), state.rngs["schedule"])
    z = sample_noise(cfg.batch_size, state.gen.spec.n_z, cfg.prior, state.rngs["noise"])
    real = state.source.sample(cfg.batch_size, state.rngs["data"])
    _gan_step(state, z, real, k)
    return z, real


def r_iterative_step(state: RunState) -> tuple[NoiseBatch, np.ndarray]:
    cfg = state.config
    gen, rev = state.gen, state.rev
    z0 = sample_noise(cfg.batch_size, gen.spec.n_z, cfg.prior, state.rngs["noise"])
    z_dot, x_dot, real = z0, None, None
    trained = False
    for t in range(cfg.n_r + 1):
        trained = schedules.coin(schedules.gate_probability(t, cfg.n_r, trained), state.rngs["schedule"])
        if not trained:
            with no_grad():
                if t > 0:
                    z_dot = reverser_forward(rev, x_dot, index=t)
                x_dot = generator_forward(gen, z_dot, 0)[0].data
            continue
        real = state.source.sample(cfg.batch_size, state.rngs["data"])
        if t == 0:
            _gan_step(state, z_dot, real, 0)
            with no_grad():
                x_dot = generator_forward(gen, z_dot, 0)[0].data
            continue
        z_dot = reverser_forward(rev, x_dot, training=True, rng=state.rngs["dropout"], index=t)
        fake, _ = generator_forward(gen, z_dot, 0)
        _d_update(state, real, fake.data)
        with frozen(state.disc):
            ratings = discriminator_forward(state.disc, fake)
        g = losses.g_loss(ratings, cfg.g_loss_mode, state.flags)
        r = losses.reverser_loss(z0, z_dot, ratings, t, state.schedule, state.flags)
        _check(g, "generator")
        _check(r, "reverser")
        # both gradients come from the same forward graph, so take both before stepping
        _grads(g, gen, rev)
        g_grads = [p.grad for p in gen.parameters()]
        _grads(r, gen, rev)
        for p, gr in zip(gen.parameters(), g_grads):
            p.grad = gr
        state.opt_g.step()
        state.opt_r.step()
        state.g_updates += 1
        x_dot = fake.data
    return z0, real


# -- diagnostics -----------------------------------------------------------

def _chain(state: RunState, z: NoiseBatch) -> tuple[list[NoiseBatch], list[Tensor]]:
    """Noise vectors and samples for index 0..N (LIS modules or R iterations)."""
    gen = state.gen
    if state.config.architecture == "r-iterative":
        zs = [z]
        xs = [generator_forward(gen, z, 0)[0]]
        for t in range(1, state.config.n_r + 1):
            zs.append(reverser_forward(state.rev, xs[-1], index=t))
            xs.append(generator_forward(gen, zs[-1], 0)[0])
        return zs, xs
    _, mods = generator_forward(gen, z, len(gen.lis))
    zs = [z] + mods
    return zs, [run_layers(gen.layers, zi.values) for zi in zs]


def diagnostic_row(state: RunState, z: NoiseBatch, real: np.ndarray) -> dict:
    """Losses on real data and on samples from every module/iteration output."""
    with no_grad():
        zs, xs = _chain(state, z)
        row = {"batch": state.batch,
               "d_real": float(losses.d_loss_real(discriminator_forward(state.disc, real)).data)}
        for i, x in enumerate(xs):
            r = discriminator_forward(state.disc, x)
            row[f"d_fake_{i}"] = float(losses.d_loss_fake(r).data)
            row[f"g_{i}"] = float(losses.g_loss(r, state.config.g_loss_mode).data)
        for i in range(1, len(zs)):
            row[f"lr_{i}"] = float(losses.similarity_loss(z, zs[i]).data)
    return row


def emit_metrics(state: RunState, z: NoiseBatch, real: np.ndarray) -> dict:
    row = diagnostic_row(state, z, real)
    state.metrics.append(row)
    if state.sink is not None:
        try:
            state.sink.write(row)
        except OSError as exc:
            raise OSError(f"cannot write metrics row for batch {state.batch}: {exc}") from exc
    return row


# -- drivers ---------------------------------------------------------------

def _loop(state: RunState, batch_fn, on_checkpoint: Callable[[RunState], None] | None) -> RunState:
    cfg = state.config
    total = cfg.total_batches
    every = cfg.checkpoint_every or max(1, total // 10)
    while state.batch < total:
        _set_lr(state, cfg.lr_at(state.batch))
        try:
            z, real = batch_fn(state)
        except NonFiniteError as exc:
            raise TrainingAborted(f"batch {state.batch + 1}: {exc}", state) from exc
        state.batch += 1
        if state.batch % cfg.log_every == 0:
            emit_metrics(state, z, real)
        if on_checkpoint is not None and state.batch % every == 0 and state.batch < total:
            on_checkpoint(state)
    return state


def train_baseline(config: TrainConfig, datasets=None, state: RunState | None = None,
                   on_checkpoint=None, sink_path=None) -> RunState:
    """Plain GAN: one D step and one G step per batch."""
    if config.architecture not in ("baseline", "g-lis", "r-separate") or config.n_lis:
        raise ValueError("train_baseline needs a generator without LIS modules")
    state = state or build_run(config, datasets, sink_path)
    return _loop(state, g_lis_step, on_checkpoint)


def train_g_lis(config: TrainConfig, datasets=None, state: RunState | None = None,
                on_checkpoint=None, sink_path=None) -> RunState:
    """G-LIS: sample how many LIS modules run, then one D and one G step."""
    if config.architecture not in ("g-lis", "baseline"):
        raise ValueError(f"train_g_lis cannot run architecture {config.architecture}")
    state = state or build_run(config, datasets, sink_path)
    return _loop(state, g_lis_step, on_checkpoint)


def train_r_iterative(config: TrainConfig, datasets=None, state: RunState | None = None,
                      on_checkpoint=None, sink_path=None) -> RunState:
    """R-iterative: per batch, iterations t = 0..N_R with the gated training schedule."""
    if config.architecture != "r-iterative":
        raise ValueError("train_r_iterative needs architecture r-iterative")
    state = state or build_run(config, datasets, sink_path)
    return _loop(state, r_iterative_step, on_checkpoint)


def train(config: TrainConfig, datasets=None, on_checkpoint=None, sink_path=None) -> RunState:
    arch = config.architecture
    if arch == "r-iterative":
        return train_r_iterative(config, datasets, on_checkpoint=on_checkpoint, sink_path=sink_path)
    if arch == "g-lis":
        return train_g_lis(config, datasets, on_checkpoint=on_checkpoint, sink_path=sink_path)
    return train_baseline(config, datasets, on_checkpoint=on_checkpoint, sink_path=sink_path)


def r_separate_streams(seed: int) -> tuple[dict[str, np.random.Generator], int]:
    children = np.random.SeedSequence([seed, 1]).spawn(3)
    rngs = {"noise": np.random.default_rng(children[0]), "dropout": np.random.default_rng(children[1])}
    return rngs, int(children[2].generate_state(1)[0])


def train_r_separate(config: TrainConfig, frozen_g: NetworkParams, datasets=None,
                     history: list | None = None, batches: int | None = None) -> NetworkParams:
    """Fit a reverser to invert a frozen generator with the half sum-of-squares loss.

    The generator runs in inference mode without gradient tracking, so its
    parameters are never touched.
    """
    rngs, init_seed = r_separate_streams(config.seed)
    g_spec = frozen_g.spec
    channels = g_spec.geometry[0] if len(g_spec.geometry) == 3 else None
    spec = preset_specs(g_spec.preset, g_spec.n_z, 0, config.dropout, channels)["reverser"]
    rev = build_network(spec, init_seed)
    opt = RMSprop(rev.parameters(), lr=config.reverser_lr)
    n = config.reverser_batches if batches is None else batches
    for b in range(n):
        z = sample_noise(config.batch_size, g_spec.n_z, config.prior, rngs["noise"])
        with no_grad():
            x, _ = generator_forward(frozen_g, z)
        z_rec = reverser_forward(rev, x, training=True, rng=rngs["dropout"])
        loss = losses.half_sse(z, z_rec)
        try:
            _descend(loss, rev, opt, "reverser")
        except NonFiniteError as exc:
            raise TrainingAborted(f"reverser batch {b + 1}: {exc}", None) from exc
        if history is not None:
            history.append(float(loss.data))
    return rev


# -- sampling and evaluation -----------------------------------------------

def generate(gen: NetworkParams, z, k: int | None = None, chunk: int = 4096) -> np.ndarray:
    """Inference-mode samples for a noise matrix (all modules by default)."""
    vals = z.data if isinstance(z, NoiseBatch) else np.asarray(getattr(z, "data", z), dtype=np.float32)
    outs = []
    with no_grad():
        for i in range(0, len(vals), chunk):
            x, _ = generator_forward(gen, NoiseBatch(Tensor(vals[i:i + chunk])), k)
            outs.append(x.data)
    return np.concatenate(outs)


def module_chain(gen: NetworkParams, z) -> list[np.ndarray]:
    """z, z'_1, ..., z'_N for a noise matrix."""
    vals = z.data if isinstance(z, NoiseBatch) else np.asarray(getattr(z, "data", z), dtype=np.float32)
    with no_grad():
        _, mods = generator_forward(gen, NoiseBatch(Tensor(vals)))
    return [vals] + [m.data for m in mods]


def eval_noise(config: TrainConfig, n_z: int, n: int | None = None) -> NoiseBatch:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    return sample_noise(n or config.eval_samples, n_z, config.prior, rng)


def reverser_mse(gen: NetworkParams, rev: NetworkParams, z: NoiseBatch) -> float:
    """Mean squared error between z and R(G(z)) in inference mode."""
    with no_grad():
        x, _ = generator_forward(gen, z)
        return float(losses.similarity_loss(z, reverser_forward(rev, x)).data)
