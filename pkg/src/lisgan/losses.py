"""Scalar objectives for the discriminator, generator, LIS modules and reverser.

All functions return scalar tensors so they can be back-propagated; every
objective is written to be *descended* (the discriminator's ascent
objective is negated).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import NoiseBatch
from .nn import tensor as T
from .nn.tensor import Tensor, as_tensor

RATING_EPS = 1e-7
G_LOSS_MODES = ("minimax", "non-saturating")


@dataclass(frozen=True)
class LambdaSchedule:
    """Similarity weight lambda_R ** (1 + i) for 0-based module/iteration i."""

    lambda_r: float

    def __post_init__(self):
        if not 0.0 <= self.lambda_r <= 1.0:
            raise ValueError(f"lambda_R must lie in [0, 1], got {self.lambda_r}")

    def weight(self, i: int) -> float:
        if i < 0:
            raise ValueError("schedule index must be >= 0")
        return float(self.lambda_r ** (1 + i))


def _vals(x) -> Tensor:
    return x.values if isinstance(x, NoiseBatch) else as_tensor(x)


def _check_pair(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def similarity_loss(z, z_prime) -> Tensor:
    """Mean over the batch of (1/N_z) * sum_j (z_j - z'_j)^2."""
    a, b = _vals(z), _vals(z_prime)
    _check_pair(a, b)
    return T.mean(T.square(T.sub(a, b)))


def half_sse(z, z_prime) -> Tensor:
    """Mean over the batch of sum_j 0.5 * (z_j - z'_j)^2 (reverser form)."""
    a, b = _vals(z), _vals(z_prime)
    _check_pair(a, b)
    return T.mul(T.tsum(T.square(T.sub(a, b))), 0.5 / a.shape[0])


def _clamped(r, flags: dict | None) -> Tensor:
    r = as_tensor(r)
    if flags is not None:
        n = int(((r.data <= RATING_EPS) | (r.data >= 1.0 - RATING_EPS)).sum())
        if n:
            flags["clamped"] = flags.get("clamped", 0) + n
    return T.clip(r, RATING_EPS, 1.0 - RATING_EPS)


def _mean_log(r: Tensor) -> Tensor:
    return T.mean(T.log(r))


def _mean_log1m(r: Tensor) -> Tensor:
    return T.mean(T.log(T.sub(1.0, r)))


def d_loss_real(ratings_real, flags=None) -> Tensor:
    return T.neg(_mean_log(_clamped(ratings_real, flags)))


def d_loss_fake(ratings_fake, flags=None) -> Tensor:
    return T.neg(_mean_log1m(_clamped(ratings_fake, flags)))


def d_loss(ratings_real, ratings_fake, flags=None) -> Tensor:
    """-mean[log r_real] - mean[log(1 - r_fake)]."""
    return T.add(d_loss_real(ratings_real, flags), d_loss_fake(ratings_fake, flags))


def g_loss(ratings_fake, mode: str = "minimax", flags=None) -> Tensor:
    """minimax: mean[log(1 - r)]; non-saturating: -mean[log r]."""
    r = _clamped(ratings_fake, flags)
    if mode == "minimax":
        return _mean_log1m(r)
    if mode == "non-saturating":
        return T.neg(_mean_log(r))
    raise ValueError(f"unknown generator loss mode {mode!r}; choose from {G_LOSS_MODES}")


def reverser_loss(z0, z_t, ratings_fake, t: int, schedule: LambdaSchedule, flags=None) -> Tensor:
    """w * half_sse(z0, z_t) + (1 - w) * mean[log(1 - r_fake)], w = lambda_R^(1+t)."""
    if t < 0:
        raise ValueError("iteration index must be >= 0")
    w = schedule.weight(t)
    sim = half_sse(z0, z_t)
    adv = _mean_log1m(_clamped(ratings_fake, flags))
    return T.add(T.mul(sim, w), T.mul(adv, 1.0 - w))


def g_lis_total_loss(similarities: Sequence, adversarial, schedule: LambdaSchedule) -> Tensor:
    """adversarial + sum_i lambda_R^(1+(i-1)) * s_i for modules i = 1..k."""
    total = as_tensor(adversarial)
    for i, s in enumerate(similarities):
        total = T.add(total, T.mul(as_tensor(s), schedule.weight(i)))
    return total


def module_weights(n_modules: int, schedule: LambdaSchedule) -> np.ndarray:
    return np.array([schedule.weight(i) for i in range(n_modules)])
