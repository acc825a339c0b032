"""Command-line entry point: ``lisgan {train,generate,interpolate,perturb,eval,hist}``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, evaluation, pnm
from .config import ConfigError, load_config
from .data import MixtureSource, ring_mixture
from .metrics import REVERSER_COLUMNS, MetricsSink
from .models import NetworkParams, NoiseBatch, SpecError, generator_forward, reverser_forward
from .nn.layers import ShapeError
from .nn.tensor import NonFiniteError, Tensor, no_grad
from .training import (TrainConfig, TrainingAborted, build_run, eval_noise, make_source, module_chain,
                       sample_noise, train_baseline, train_g_lis, train_r_iterative, train_r_separate)

log = logging.getLogger("lisgan")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(ValueError):
    pass


# -- train ------------------------------------------------------------------

def _save_run(state, directory: Path, suffix: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    extra = {"architecture": state.config.architecture, "seed": state.config.seed, "batch": state.batch}
    path = directory / f"generator{suffix}.lisc"
    checkpoint.save_network(path, state.gen, extra)
    checkpoint.save_network(directory / f"discriminator{suffix}.lisc", state.disc, extra)
    if state.rev is not None:
        checkpoint.save_network(directory / f"reverser{suffix}.lisc", state.rev, extra)
    return path


def cmd_train(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    last_good: list[Path] = []

    def on_checkpoint(state):
        last_good.append(_save_run(state, ckpt_dir, f"-{state.batch:07d}"))

    state = build_run(config, sink_path=out / "metrics.csv")
    fn = {"r-iterative": train_r_iterative, "g-lis": train_g_lis}.get(config.architecture, train_baseline)
    try:
        fn(config, state=state, on_checkpoint=on_checkpoint)
        final = _save_run(state, out, "")
        if config.architecture == "r-separate":
            history: list[float] = []
            rev = train_r_separate(config, state.gen, history=history)
            checkpoint.save_network(out / "reverser.lisc", rev, {"architecture": "r-separate",
                                                                 "seed": config.seed})
            with MetricsSink(out / "reverser_metrics.csv", REVERSER_COLUMNS) as sink:
                for i, loss in enumerate(history, start=1):
                    if i % config.log_every == 0:
                        sink.write({"batch": i, "r_loss": loss})
    except TrainingAborted as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        print(f"last good checkpoint: {last_good[-1] if last_good else 'none (failed before the first one)'}",
              file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        if state.sink is not None:
            state.sink.close()
    print(f"trained {state.batch} batches; final checkpoint {final}")
    return EXIT_OK


# -- sampling commands --------------------------------------------------------

def _load_generator(path) -> NetworkParams:
    gen, _ = checkpoint.load_network(path, role="generator")
    return gen


def _noise_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 3]))


def _render(gen: NetworkParams, z: np.ndarray, k: int | None, reverser: NetworkParams | None) -> np.ndarray:
    with no_grad():
        batch = NoiseBatch(Tensor(z.astype(np.float32)))
        x, _ = generator_forward(gen, batch, k)
        if reverser is not None:
            x, _ = generator_forward(gen, reverser_forward(reverser, x), k)
    return x.data


def _write_samples(out: Path, name: str, samples: np.ndarray, labels: list[tuple[int, int]]) -> int:
    """Images become one PGM/PPM each; points go to ``<name>.csv``. Returns files written."""
    if samples.ndim == 4:
        suffix = ".pgm" if samples.shape[1] == 1 else ".ppm"
        for (i, j), img in zip(labels, samples):
            pnm.write(out / f"{name}_{i:05d}_{j}{suffix}", pnm.to_uint8(img))
        return len(samples)
    with open(out / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "variant"] + [f"x{c}" for c in range(samples.shape[1])])
        for (i, j), row in zip(labels, samples):
            w.writerow([i, j] + [repr(float(v)) for v in row])
    return 1


def _write_noise(path: Path, chains: list[np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "module"] + [f"z{c}" for c in range(chains[0].shape[1])])
        for j, zs in enumerate(chains):
            for i, row in enumerate(zs):
                w.writerow([i, j] + [repr(float(v)) for v in row])


def _prior_noise(gen: NetworkParams, count: int, prior: str, seed: int) -> np.ndarray:
    return sample_noise(count, gen.spec.n_z, prior, _noise_rng(seed)).data


def cmd_generate(args) -> int:
    gen = _load_generator(args.checkpoint)
    rev = checkpoint.load_network(args.reverser, role="reverser")[0] if args.reverser else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.count == 0:
        print("count is 0; nothing written")
        return EXIT_OK
    z = _prior_noise(gen, args.count, args.prior, args.seed)
    if args.mode == "final":
        samples = _render(gen, z, None, rev)
        labels = [(i, len(gen.lis)) for i in range(args.count)]
    else:
        parts = [_render(gen, z, k, rev) for k in range(len(gen.lis) + 1)]
        samples = np.stack(parts, axis=1).reshape((-1,) + parts[0].shape[1:])
        labels = [(i, k) for i in range(args.count) for k in range(len(gen.lis) + 1)]
    _write_samples(out, "sample", samples, labels)
    _write_noise(out / "noise.csv", module_chain(gen, z))
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def cmd_interpolate(args) -> int:
    gen = _load_generator(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ends = _prior_noise(gen, 2 * args.rows, args.prior, args.seed)
    z = np.concatenate([evaluation.interpolate(ends[2 * r], ends[2 * r + 1], args.steps) for r in range(args.rows)])
    samples = _render(gen, z, None, None)
    _write_samples(out, "interp", samples, [(r, s) for r in range(args.rows) for s in range(args.steps)])
    _write_noise(out / "noise.csv", [z])
    print(f"wrote {args.rows} rows of {args.steps} samples to {out}")
    return EXIT_OK


def cmd_perturb(args) -> int:
    gen = _load_generator(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    centers = _prior_noise(gen, args.groups, args.prior, args.seed)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 4]))
    z = np.concatenate([evaluation.perturb(c, args.count, args.scale, rng) for c in centers])
    samples = _render(gen, z, None, None)
    _write_samples(out, "perturb", samples, [(g, i) for g in range(args.groups) for i in range(args.count)])
    _write_noise(out / "noise.csv", [z])
    print(f"wrote {args.groups} groups of {args.count} samples to {out}")
    return EXIT_OK


# -- evaluation ---------------------------------------------------------------

def evaluation_report(gen: NetworkParams, config: TrainConfig, count: int, source=None) -> list[tuple[str, float]]:
    """(metric, value) rows: displacement per module, plus coverage/HQ/IS on mixtures."""
    source = source if source is not None else make_source(config)
    if tuple(source.geometry) != tuple(gen.spec.geometry):
        raise UsageError(f"generator geometry {tuple(gen.spec.geometry)} does not match data geometry "
                         f"{tuple(source.geometry)}")
    z = eval_noise(config, gen.spec.n_z, count)
    chain = module_chain(gen, z)
    rows: list[tuple[str, float]] = [("samples", float(count)), ("n_r", float(len(gen.lis)))]
    for d in evaluation.displacement_stats(chain[0], chain[1:]):
        rows += [(f"displacement_mean_{d.module}", d.mean), (f"displacement_max_{d.module}", d.max)]
    if isinstance(source, MixtureSource):
        x = _render(gen, z.data, None, None)
        covered, hq = evaluation.mode_coverage(x, source.spec)
        score, spread = evaluation.inception_score(evaluation.mixture_responsibilities(x, source.spec),
                                                   splits=min(10, count))
        rows += [("modes", float(source.spec.n_modes)), ("covered_modes", float(covered)),
                 ("hq_fraction", hq), ("inception_score_mean", score), ("inception_score_std", spread)]
    return rows


def cmd_eval(args) -> int:
    gen = _load_generator(args.checkpoint)
    if args.config:
        config = load_config(args.config)
    else:
        config = TrainConfig(dataset="ring", preset=gen.spec.preset, seed=args.seed)
    source = None
    if config.dataset == "ring":
        source = MixtureSource(ring_mixture(config.ring_modes, config.ring_radius, config.ring_std))
    rows = evaluation_report(gen, config, args.count, source)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for name, value in rows:
            w.writerow([name, repr(float(value))])
    for name, value in rows:
        print(f"{name:>24}: {value:.6g}")
    return EXIT_OK


def read_noise_dump(path) -> dict[int, np.ndarray]:
    """module index -> (n, N_z) matrix from a ``noise.csv`` written by generate."""
    by_module: dict[int, list[list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["index", "module"]:
            raise ValueError(f"{path}: not a noise dump (header {header})")
        for line in reader:
            by_module.setdefault(int(line[1]), []).append([float(v) for v in line[2:]])
    return {k: np.asarray(v) for k, v in by_module.items()}


def cmd_hist(args) -> int:
    dump = read_noise_dump(args.noise)
    after = args.after if args.after is not None else max(dump)
    for m in (args.before, after):
        if m not in dump:
            raise UsageError(f"module {m} not in {args.noise} (have {sorted(dump)})")
    hist = evaluation.component_histograms(dump[args.before], dump[after], args.bins)
    hist.to_csv(args.out)
    print(f"wrote {hist.before.shape[0]} x {args.bins} histogram bins to {args.out}")
    return EXIT_OK


# -- plumbing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lisgan", description="Train and inspect GANs with learned input-space "
                                                          "manipulation (R-separate, R-iterative, G-LIS).")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from a key=value config file")
    t.add_argument("config")
    t.add_argument("--out", required=True, help="run directory for metrics and checkpoints")
    t.set_defaults(func=cmd_train)

    def sampling(name, func, help_text):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("checkpoint", help="generator checkpoint")
        s.add_argument("--out", required=True)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--prior", choices=("standard-normal", "uniform"), default="standard-normal")
        s.set_defaults(func=func)
        return s

    g = sampling("generate", cmd_generate, "sample from a generator")
    g.add_argument("--count", type=int, default=64)
    g.add_argument("--mode", choices=("final", "per-module"), default="final")
    g.add_argument("--reverser", help="reverser checkpoint; samples become G(R(G(z)))")

    i = sampling("interpolate", cmd_interpolate, "linear paths between random noise pairs")
    i.add_argument("--rows", type=int, default=8)
    i.add_argument("--steps", type=int, default=10)

    q = sampling("perturb", cmd_perturb, "groups of samples around random noise vectors")
    q.add_argument("--groups", type=int, default=1)
    q.add_argument("--count", type=int, default=64)
    q.add_argument("--scale", type=float, default=1.0)

    e = sub.add_parser("eval", help="coverage, HQ fraction, displacement and score report")
    e.add_argument("checkpoint")
    e.add_argument("--config", help="config file naming the dataset (default: the 8-mode ring)")
    e.add_argument("--count", type=int, default=2000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="CSV report path")
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("hist", help="per-component histograms from a noise dump")
    h.add_argument("noise", help="noise.csv from generate")
    h.add_argument("--before", type=int, default=0)
    h.add_argument("--after", type=int, help="module index (default: last)")
    h.add_argument("--bins", type=int, default=100)
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_hist)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid configuration:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, SpecError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, checkpoint.CheckpointError, pnm.PNMError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
