"""Stochastic per-batch schedules.

R-iterative trains iteration t with probability 1 once an earlier iteration
of the same batch was trained, and with (1 + t) / (1 + N_R) otherwise.
G-LIS stops the LIS chain before module i (1-based) with independent
probability 0.5 ** (N_R - (i - 1)); if no stop fires all N_R modules run.
"""

from __future__ import annotations

import numpy as np


def gate_probability(t: int, n_r: int, previous_trained: bool) -> float:
    if previous_trained:
        return 1.0
    return (1.0 + t) / (1.0 + n_r)


def coin(p: float, rng: np.random.Generator) -> bool:
    # certain outcomes draw nothing, so N_R = 0 consumes no schedule randomness
    if p >= 1.0:
        return True
    return bool(rng.random() < p)


def sample_iteration_gates(n_r: int, rng: np.random.Generator) -> list[bool]:
    """Which of the iterations t = 0..N_R are trained for one batch."""
    out = []
    prev = False
    for t in range(n_r + 1):
        prev = coin(gate_probability(t, n_r, prev), rng)
        out.append(prev)
    return out


def first_trained_distribution(n_r: int) -> np.ndarray:
    """P(first trained iteration = t) for t = 0..N_R (the last gate is certain)."""
    probs = np.zeros(n_r + 1)
    untrained = 1.0
    for t in range(n_r + 1):
        p = (1.0 + t) / (1.0 + n_r)
        probs[t] = untrained * p
        untrained *= 1.0 - p
    return probs


def expected_generator_updates(n_r: int) -> float:
    """Expected trained iterations (one G update each) per batch."""
    first = first_trained_distribution(n_r)
    return float(sum(first[t] * (n_r + 1 - t) for t in range(n_r + 1)))


def stop_probability(i: int, n_r: int) -> float:
    """Probability of stopping right before 1-based module i."""
    return 0.5 ** (n_r - (i - 1))


def sample_module_count(n_r: int, rng: np.random.Generator) -> int:
    for i in range(1, n_r + 1):
        if coin(stop_probability(i, n_r), rng):
            return i - 1
    return n_r


def module_count_distribution(n_r: int) -> np.ndarray:
    """P(k modules executed) for k = 0..N_R under the sequential stop rule."""
    probs = np.zeros(n_r + 1)
    reach = 1.0
    for i in range(1, n_r + 1):
        s = stop_probability(i, n_r)
        probs[i - 1] = reach * s
        reach *= 1.0 - s
    probs[n_r] = reach
    return probs
