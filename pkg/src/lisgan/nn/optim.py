from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass
class OptimizerState:
    """RMSprop accumulators, one per parameter, in parameter order."""

    lr: float = 5e-4
    rho: float = 0.9
    eps: float = 1e-8
    acc: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0 or self.lr <= 0:
            raise ValueError("lr and eps must be positive")


def rmsprop_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None], state: OptimizerState) -> None:
    """In-place RMSprop update. Parameters whose gradient is None are skipped.

    The whole step is rejected with NonFiniteError before anything is
    mutated if any gradient holds NaN or Inf.
    """
    if not state.acc:
        state.acc = [np.zeros_like(p.data) for p in params]
    if len(state.acc) != len(params) or len(grads) != len(params):
        raise ValueError("params, grads and accumulators must align")
    for p, g, a in zip(params, grads, state.acc):
        if g is not None and g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.name} {p.shape}")
        if a.shape != p.shape:
            raise ValueError(f"accumulator shape {a.shape} does not match parameter {p.name} {p.shape}")
        if g is not None and not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for {p.name}")
    rho, lr, eps = state.rho, state.lr, state.eps
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        a = state.acc[i]
        a *= rho
        a += (1.0 - rho) * g * g
        p.data -= (lr * g / (np.sqrt(a) + eps)).astype(p.data.dtype)


class RMSprop:
    """Convenience wrapper binding a parameter list to an OptimizerState."""

    def __init__(self, params: Sequence[Tensor], lr: float = 5e-4, rho: float = 0.9, eps: float = 1e-8):
        self.params = list(params)
        self.state = OptimizerState(lr=lr, rho=rho, eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = value

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        rmsprop_step(self.params, [p.grad for p in self.params], self.state)
