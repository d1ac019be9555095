"""Adaptive-moment (Adam) parameter updates.

Bias-corrected first/second moment estimates with the usual defaults
(lr 1e-3, decays 0.9/0.999, eps 1e-8).  Updates are deterministic given
identical inputs; parameter data is modified in place between tapes.
"""

from __future__ import annotations

import numpy as np

from .tensor import DiffError, Tensor


class AdamState:
    """Per-parameter moment accumulators plus the shared step counter."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]


def adam_step(state: AdamState, grads: dict[Tensor, Tensor]) -> None:
    """Apply one Adam update to every parameter in `state`.

    Parameters missing from `grads` are treated as zero-gradient (their
    moments still decay, matching a plain zero-gradient step).
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i, p in enumerate(state.params):
        gt = grads.get(p)
        g = gt.data if gt is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise DiffError(
                f"gradient shape {g.shape} does not match parameter "
                f"{p.name or i} shape {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise DiffError(f"non-finite gradient for parameter {p.name or i}")
        m = state.m[i]
        v = state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
