"""Finite-difference verification of analytic gradients.

`grad_check` compares the tape's gradient of a scalar-valued function
against central differences, coordinate by coordinate.  Coordinates where
the forward and backward one-sided differences disagree badly are flagged
as sitting on a non-differentiable kink (e.g. relu at exactly zero) and
excluded from the pass/fail verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import DiffError, Tensor, backward, no_grad, recording

# One-sided slopes disagreeing by more than this fraction of their scale
# mark a kink; smooth functions differ only by O(step * curvature).
_KINK_FRACTION = 0.05


@dataclass
class GradCheckReport:
    rel_err: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    kinks: np.ndarray       # bool mask of excluded coordinates
    max_rel_err: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_rel_err <= self.tolerance)


def grad_check(fn: Callable[[Tensor], Tensor], point: np.ndarray,
               step: float = 1e-5, tolerance: float = 1e-4) -> GradCheckReport:
    """Check d fn / d point against central finite differences.

    `fn` must map a Tensor to a scalar Tensor using recorded primitives and
    must be deterministic (draw any noise once, outside, and close over it).
    """
    if step <= 0:
        raise DiffError("finite-difference step must be positive")
    x0 = np.asarray(point, dtype=np.float64)
    leaf = Tensor(x0.copy(), requires_grad=True)
    with recording() as rec:
        loss = fn(leaf)
    if loss.data.size != 1:
        raise DiffError("grad_check needs a scalar-valued function")
    analytic = backward(rec, loss)[leaf].data.reshape(-1)

    flat = x0.reshape(-1)
    numeric = np.empty_like(flat)
    kinks = np.zeros(flat.size, dtype=bool)
    with no_grad():
        f0 = _eval(fn, x0)
        for i in range(flat.size):
            pert = flat.copy()
            pert[i] = flat[i] + step
            fp = _eval(fn, pert.reshape(x0.shape))
            pert[i] = flat[i] - step
            fm = _eval(fn, pert.reshape(x0.shape))
            numeric[i] = (fp - fm) / (2.0 * step)
            fwd = (fp - f0) / step
            bwd = (f0 - fm) / step
            scale = max(abs(fwd), abs(bwd), 1.0)
            if abs(fwd - bwd) > _KINK_FRACTION * scale:
                kinks[i] = True

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    rel = np.abs(analytic - numeric) / denom
    live = rel[~kinks]
    max_rel = float(live.max()) if live.size else 0.0
    return GradCheckReport(rel_err=rel, analytic=analytic, numeric=numeric,
                           kinks=kinks, max_rel_err=max_rel, tolerance=tolerance)


def _eval(fn, arr: np.ndarray) -> float:
    val = fn(Tensor(arr)).data
    if not np.all(np.isfinite(val)):
        raise DiffError("non-finite function evaluation during grad_check")
    return float(val)
