"""Central finite-difference oracle for analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckResult:
    ok: bool
    max_abs_err: float
    worst: str

    def __bool__(self) -> bool:
        return self.ok


def numeric_grad(fn: Callable[[], float], arr: np.ndarray, eps: float) -> np.ndarray:
    """d fn / d arr by central differences; ``arr`` is perturbed in place and restored."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = fn()
        flat[i] = orig - eps
        fm = fn()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def gradcheck(build: Callable[[Sequence[Tensor]], Tensor], inputs: Sequence[Tensor],
              eps: float = 1e-3, rtol: float = 1e-2, atol: float = 1e-4) -> GradCheckResult:
    """Compare backward() against central differences for every input.

    ``build`` maps the input tensors to a scalar tensor and must be
    deterministic (fix any dropout mask before calling). Inputs should be
    float64 so the differences have headroom.
    """
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    out = build(inputs)
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    def scalar() -> float:
        return float(build(inputs).data)

    worst, worst_err, ok = "", 0.0, True
    for idx, (t, a) in enumerate(zip(inputs, analytic)):
        n = numeric_grad(scalar, t.data, eps)
        err = np.abs(a - n)
        bound = np.maximum(atol, rtol * np.maximum(np.abs(a), np.abs(n)))
        if (err > bound).any():
            ok = False
        m = float(err.max()) if err.size else 0.0
        if m >= worst_err:
            worst_err, worst = m, t.name or f"input{idx}"
    return GradCheckResult(ok, worst_err, worst)
