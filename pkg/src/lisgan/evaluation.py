"""Measurements on generated samples and noise vectors."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import MixtureSpec

PROB_FLOOR = 1e-12
KL_RESOLUTION = 64 * np.finfo(np.float64).eps


def _arr(x) -> np.ndarray:
    data = getattr(x, "data", x)
    data = getattr(data, "data", data)  # NoiseBatch -> Tensor -> ndarray
    return np.asarray(data, dtype=np.float64)


# -- mode coverage ----------------------------------------------------------

def mode_coverage(samples, spec: MixtureSpec, eps: float | None = None) -> tuple[int, float]:
    """(number of covered modes, fraction of samples within eps of any center).

    A mode counts as covered when at least max(1, n / (10 * n_modes))
    samples lie within eps of its center. eps defaults to 3 * std.
    """
    eps = 3.0 * spec.std if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = _arr(samples).reshape(-1, spec.dim)
    n = len(x)
    if n == 0:
        return 0, 0.0
    d2 = ((x[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=2)
    near = d2 <= eps * eps
    need = max(1.0, n / (10.0 * spec.n_modes))
    covered = int((near.sum(axis=0) >= need).sum())
    return covered, float(near.any(axis=1).mean())


def mixture_responsibilities(samples, spec: MixtureSpec) -> np.ndarray:
    """Posterior mode probabilities p(mode | x); rows sum to one."""
    x = _arr(samples).reshape(-1, spec.dim)
    d2 = ((x[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=2)
    logits = np.log(np.maximum(spec.weights, PROB_FLOOR))[None, :] - d2 / (2 * spec.std ** 2)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


# -- noise-vector statistics ------------------------------------------------

@dataclass
class Displacement:
    module: int
    mean: float
    max: float


def displacement_stats(z, z_primes: Sequence) -> list[Displacement]:
    """Mean and max of per-example MSE between z and each module's z'."""
    base = _arr(z)
    out = []
    for i, zp in enumerate(z_primes, start=1):
        other = _arr(zp)
        if other.shape != base.shape:
            raise ValueError(f"module {i}: shape {other.shape} != {base.shape}")
        per_example = ((base - other) ** 2).mean(axis=1)
        out.append(Displacement(i, float(per_example.mean()), float(per_example.max())))
    return out


@dataclass
class ComponentHistograms:
    edges: np.ndarray  # (N_z, bins + 1)
    before: np.ndarray  # (N_z, bins) densities
    after: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["component", "bin", "left", "right", "density_before", "density_after"])
            for c in range(self.before.shape[0]):
                for b in range(self.before.shape[1]):
                    w.writerow([c, b, repr(float(self.edges[c, b])), repr(float(self.edges[c, b + 1])),
                                repr(float(self.before[c, b])), repr(float(self.after[c, b]))])


def component_histograms(z_before, z_after, bins: int = 100) -> ComponentHistograms:
    """Density histograms per component over the pooled range of both inputs."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    a, b = _arr(z_before), _arr(z_after)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"need two n x N_z matrices with equal N_z, got {a.shape} and {b.shape}")
    n_z = a.shape[1]
    edges = np.empty((n_z, bins + 1))
    before = np.empty((n_z, bins))
    after = np.empty((n_z, bins))
    for c in range(n_z):
        lo = min(a[:, c].min(), b[:, c].min())
        hi = max(a[:, c].max(), b[:, c].max())
        if hi - lo <= 0:
            lo, hi = lo - 1e-6, hi + 1e-6
        before[c], edges[c] = np.histogram(a[:, c], bins=bins, range=(lo, hi), density=True)
        after[c], _ = np.histogram(b[:, c], bins=bins, range=(lo, hi), density=True)
    return ComponentHistograms(edges, before, after)


# -- noise sets for figures -------------------------------------------------

def interpolate(z_a, z_b, steps: int = 10) -> np.ndarray:
    """``steps`` vectors from z_a to z_b inclusive, equally spaced."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    a, b = _arr(z_a).reshape(-1), _arr(z_b).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"endpoint shapes differ: {a.shape} vs {b.shape}")
    alpha = np.linspace(0.0, 1.0, steps)[:, None]
    out = (1.0 - alpha) * a[None, :] + alpha * b[None, :]
    out[0], out[-1] = a, b
    return out


def perturb(z, count: int = 64, scale: float = 1.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """``count`` copies of z, each plus scale * N(0, I) noise."""
    if count < 1 or scale < 0:
        raise ValueError("count must be >= 1 and scale >= 0")
    base = _arr(z).reshape(-1)
    rng = rng if rng is not None else np.random.default_rng()
    return base[None, :] + scale * rng.standard_normal((count, base.size))


# -- Inception Score over given class probabilities -------------------------

def check_prob_matrix(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"probability matrix must be 2-D, got shape {p.shape}")
    if (p < 0).any():
        raise ValueError("probabilities must be nonnegative")
    if np.abs(p.sum(axis=1) - 1.0).max() > 1e-5:
        raise ValueError("probability rows must sum to 1 (within 1e-5)")
    return p


def inception_score(p, splits: int = 10) -> tuple[float, float]:
    """exp(E_x KL(p(y|x) || p(y))) per split; returns (mean, std) across splits.

    Splits have n // splits rows each and the last one also takes the
    remainder.
    """
    p = check_prob_matrix(p)
    n = len(p)
    if splits < 1 or splits > n:
        raise ValueError(f"splits must lie in [1, {n}]")
    size = n // splits
    scores = []
    for s in range(splits):
        part = p[s * size:(s + 1) * size] if s < splits - 1 else p[s * size:]
        marginal = np.array([math.fsum(col) for col in part.T]) / len(part)
        kl = part * np.log(np.maximum(part, PROB_FLOOR) / np.maximum(marginal, PROB_FLOOR))
        mean_kl = kl.sum(axis=1).mean()
        # below float64 resolution of the log terms; KL is nonnegative
        if mean_kl < KL_RESOLUTION:
            mean_kl = 0.0
        scores.append(np.exp(mean_kl))
    return float(np.mean(scores)), float(np.std(scores))
