"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line (criterion 6 may record WARN) that
is printed in the pytest terminal summary and echoed to stdout.
"""

from __future__ import annotations

import math
import struct
import time
import warnings
from statistics import median

import numpy as np
import pytest

import conftest
from gradsuite import ATOL, CASES, EPS, INSTANCES, RTOL, run_case
from lisgan import checkpoint, losses, schedules
from lisgan.evaluation import inception_score, interpolate, mode_coverage, perturb
from lisgan.losses import LambdaSchedule
from lisgan.models import build_network, preset_specs
from lisgan.nn.tensor import Tensor
from lisgan.training import (TrainConfig, eval_noise, generate, r_separate_streams, reverser_mse, train,
                             train_r_separate)

SEEDS = (0, 1, 2)
RING_BATCHES = 20_000


def record(number: int, ok: bool | None, detail: str) -> None:
    status = {True: "PASS", False: "FAIL", None: "WARN"}[ok]
    line = f"criterion {number:2d}: {status}  {detail}"
    conftest.ACCEPTANCE_LINES[number] = line
    print(line)


def check(number: int, ok: bool, detail: str) -> None:
    record(number, ok, detail)
    assert ok, detail


def ring_config(**kw) -> TrainConfig:
    base = dict(architecture="g-lis", n_r=1, lambda_r=0.9, phases=[(RING_BATCHES, 5e-4)], log_every=200)
    base.update(kw)
    return TrainConfig(**base)


def ring_result(config: TrainConfig) -> dict:
    state = train(config)
    samples = generate(state.gen, eval_noise(config, state.gen.spec.n_z))
    covered, hq = mode_coverage(samples, state.source.spec)
    return {"covered": covered, "hq": hq, "state": state}


@pytest.fixture(scope="session")
def ring_runs():
    """Trained ring runs shared by criteria 4, 5 and 7, keyed by (variant, seed)."""
    variants = {
        "baseline": dict(architecture="baseline", n_r=0),
        "g-lis": dict(),
        "lambda0": dict(lambda_r=0.0),
    }
    return {(name, seed): ring_result(ring_config(seed=seed, **kw))
            for name, kw in variants.items() for seed in SEEDS}


def test_criterion_01_gradient_suite():
    start = time.perf_counter()
    failures = []
    for label, kind, wn in CASES:
        passed, worst = run_case(kind, wn, INSTANCES, base_seed=10_000)
        if passed < INSTANCES:
            failures.append(f"{label} {passed}/{INSTANCES} (worst {worst:.2e})")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    check(1, ok, f"{len(CASES)} layer variants x {INSTANCES} instances, eps={EPS} rtol={RTOL} atol={ATOL}, "
                 f"{elapsed:.1f}s" + (f"; failing: {failures}" if failures else ""))


def _o_mean_log1m(r):
    return sum(math.log(1 - min(max(v, 1e-7), 1 - 1e-7)) for v in r) / len(r)


def test_criterion_02_loss_formulas():
    sched = LambdaSchedule(0.9)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(20_000 + seed)
        m, n = int(rng.integers(1, 10)), int(rng.integers(1, 10))
        z, zp = rng.normal(size=(m, n)), rng.normal(size=(m, n))
        real, fake = rng.uniform(0, 1, m), rng.uniform(0, 1, m)
        t = int(rng.integers(0, 4))
        sims = [float(v) for v in rng.uniform(0, 2, int(rng.integers(0, 4)))]
        adv = float(rng.normal())
        T = lambda a: Tensor(np.asarray(a, dtype=np.float64), dtype=np.float64)  # noqa: E731
        sim_o = sum(sum((z[i, j] - zp[i, j]) ** 2 for j in range(n)) / n for i in range(m)) / m
        half_o = sum(sum(0.5 * (z[i, j] - zp[i, j]) ** 2 for j in range(n)) for i in range(m)) / m
        d_o = -sum(math.log(min(max(v, 1e-7), 1 - 1e-7)) for v in real) / m - _o_mean_log1m(fake)
        w = 0.9 ** (1 + t)
        pairs = [
            (losses.similarity_loss(T(z), T(zp)), sim_o),
            (losses.d_loss(T(real), T(fake)), d_o),
            (losses.g_loss(T(fake)), _o_mean_log1m(fake)),
            (losses.reverser_loss(T(z), T(zp), T(fake), t, sched), w * half_o + (1 - w) * _o_mean_log1m(fake)),
            (losses.g_lis_total_loss([T(s) for s in sims], T(adv), sched),
             adv + sum(0.9 ** (1 + i) * s for i, s in enumerate(sims))),
        ]
        worst = max(worst, max(abs(float(got.data) - want) for got, want in pairs))
    weights = tuple(sched.weight(i) for i in range(3))
    exact = weights == (0.9, 0.9 ** 2, 0.9 ** 3) and np.allclose(weights, (0.9, 0.81, 0.729), rtol=0, atol=1e-15)
    check(2, worst <= 1e-6 and exact, f"max oracle deviation {worst:.2e} over 100 inputs (tol 1e-6); "
                                      f"module weights {tuple(round(w, 12) for w in weights)}")


def test_criterion_03_schedule_distributions():
    start = time.perf_counter()
    rng = np.random.default_rng(30_000)
    n = 100_000
    updates = sum(sum(schedules.sample_iteration_gates(3, rng)) for _ in range(n)) / n
    ks = np.bincount([schedules.sample_module_count(3, rng) for _ in range(n)], minlength=4) / n
    dev = float(np.abs(ks - schedules.module_count_distribution(3)).max())
    elapsed = time.perf_counter() - start
    ok = abs(updates - 2.8) <= 0.05 and dev <= 0.02 and elapsed < 10
    check(3, ok, f"mean G updates/batch {updates:.4f} (analytic {schedules.expected_generator_updates(3)}, "
                 f"target 2.8 +/- 0.05); module-count max deviation {dev:.4f} (tol 0.02); {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_04_error_avoidance(ring_runs):
    base_hq = median(ring_runs["baseline", s]["hq"] for s in SEEDS)
    lis_hq = median(ring_runs["g-lis", s]["hq"] for s in SEEDS)
    lis_cov = median(ring_runs["g-lis", s]["covered"] for s in SEEDS)
    ok = lis_hq > base_hq and lis_cov >= 7
    check(4, ok, f"median HQ G-LIS {lis_hq:.4f} vs baseline {base_hq:.4f}; median G-LIS coverage {lis_cov}/8 "
                 f"(per seed {[ring_runs['g-lis', s]['covered'] for s in SEEDS]})")


@pytest.mark.slow
def test_criterion_05_mode_collapse_ablation(ring_runs):
    cov0 = [ring_runs["lambda0", s]["covered"] for s in SEEDS]
    cov9 = [ring_runs["g-lis", s]["covered"] for s in SEEDS]
    ok = median(cov0) < median(cov9)
    check(5, ok, f"median coverage lambda_R=0 {median(cov0)} vs lambda_R=0.9 {median(cov9)} "
                 f"(per seed {cov0} vs {cov9}); strict decrease required")


@pytest.mark.slow
def test_criterion_06_similarity_constraint_curves():
    finite, final1, final3 = True, [], []
    for seed in SEEDS:
        state = train(ring_config(seed=seed, n_r=3))
        rows = state.metrics
        finite &= all(math.isfinite(r[f"lr_{i}"]) for r in rows for i in (1, 2, 3))
        tail = rows[-max(1, len(rows) // 10):]
        final1.append(float(np.mean([r["lr_1"] for r in tail])))
        final3.append(float(np.mean([r["lr_3"] for r in tail])))
    ordered = median(final3) >= median(final1)
    detail = (f"L_R finite throughout: {finite}; final-phase median L_R module 3 {median(final3):.3e} vs "
              f"module 1 {median(final1):.3e}")
    if finite and not ordered:
        warnings.warn(f"module 3 similarity loss below module 1 ({detail})")
        record(6, None, detail + " (ordering is an empirical tendency, reported as a warning)")
    else:
        record(6, finite, detail)
    assert finite, detail


@pytest.mark.slow
def test_criterion_07_r_separate_progress(ring_runs):
    ratios, frozen = [], True
    for seed in SEEDS:
        gen = ring_runs["baseline", seed]["state"].gen
        config = TrainConfig(architecture="r-separate", n_r=1, seed=seed, dropout=0.1)
        z = eval_noise(config, gen.spec.n_z)
        init = build_network(preset_specs("ring2d", dropout=0.1)["reverser"], r_separate_streams(seed)[1])
        before = gen.snapshot()
        rev = train_r_separate(config, gen)
        after = gen.snapshot()
        frozen &= all(before[k].tobytes() == after[k].tobytes() for k in before)
        ratios.append(reverser_mse(gen, rev, z) / reverser_mse(gen, init, z))
    ok = all(r < 0.5 for r in ratios) and frozen
    check(7, ok, f"trained/initial reverser MSE per seed {[round(r, 3) for r in ratios]} (need < 0.5); "
                 f"G bit-identical: {frozen}")


def test_criterion_08_inception_score(tmp_path):
    uniform_exact = all(inception_score(np.full((40, c), 1.0 / c), splits=4)[0] == 1.0 for c in range(2, 40))
    onehot_err = max(abs(inception_score(np.eye(c), splits=1)[0] - c) for c in range(2, 40))
    rng = np.random.default_rng(80_000)
    worst = 0.0
    for _ in range(20):
        n, c, splits = int(rng.integers(20, 80)), int(rng.integers(2, 10)), int(rng.integers(1, 6))
        p = rng.dirichlet(np.full(c, 0.5), n)
        size = n // splits
        scores = []
        for s in range(splits):
            rows = p[s * size:(s + 1) * size] if s < splits - 1 else p[s * size:]
            marg = [sum(rows[i][j] for i in range(len(rows))) / len(rows) for j in range(c)]
            kl = sum(rows[i][j] * math.log(max(rows[i][j], 1e-12) / max(marg[j], 1e-12))
                     for i in range(len(rows)) for j in range(c))
            scores.append(math.exp(kl / len(rows)))
        worst = max(worst, abs(inception_score(p, splits)[0] - sum(scores) / len(scores)))
    ok = uniform_exact and onehot_err <= 1e-9 and worst <= 1e-6
    check(8, ok, f"uniform rows exactly 1.0: {uniform_exact}; one-hot max |IS - C| {onehot_err:.1e}; "
                 f"oracle max deviation {worst:.1e}")


def test_criterion_09_determinism_and_persistence(tmp_path):
    paths = []
    for run in ("a", "b"):
        state = train(ring_config(n_r=3, phases=[(300, 5e-4)], log_every=25), sink_path=tmp_path / f"{run}.csv")
        state.sink.close()
        paths.append(tmp_path / f"{run}.csv")
    same_csv = paths[0].read_bytes() == paths[1].read_bytes()
    checkpoint.save_network(tmp_path / "g.lisc", state.gen)
    back, _ = checkpoint.load_network(tmp_path / "g.lisc", role="generator")
    bit_exact = all(a.data.tobytes() == b.data.tobytes() for a, b in zip(state.gen.parameters(), back.parameters()))
    raw = (tmp_path / "g.lisc").read_bytes()
    codes = []
    for bad in (raw[: len(raw) // 2], b"XXXX" + raw[4:], raw[:4] + struct.pack("<I", 2) + raw[8:]):
        try:
            checkpoint.decode(bad)
            codes.append(None)
        except checkpoint.CheckpointError as exc:
            codes.append(exc.code)
    ok = same_csv and bit_exact and codes == ["crc", "magic", "version"]
    check(9, ok, f"byte-identical metrics: {same_csv}; checkpoint bit-exact: {bit_exact}; "
                 f"corruption codes {codes}")


def test_criterion_10_interpolation_and_perturbation_defaults():
    rng = np.random.default_rng(100_000)
    a, b = rng.normal(size=32), rng.normal(size=32)
    row = interpolate(a, b)
    group = perturb(a, rng=rng)
    ok = row.shape == (10, 32) and group.shape == (64, 32) and np.array_equal(row[0], a) and np.array_equal(row[-1], b)
    check(10, ok, f"interpolation row {row.shape[0]} samples (need 10); perturbation group {group.shape[0]} (need 64)")
