"""Spectral envelopes and warped cepstral coefficients.

A spectral frame is a non-negative magnitude-squared envelope sampled on
the half-open FFT grid (fft_size // 2 + 1 bins).  Cepstral coefficients
live on a frequency axis bent by a first-order all-pass warp, which packs
resolution into low frequencies the way mel-like scales do.

The analysis direction solves a weighted least-squares fit of the warped
cosine basis to the log envelope (weights 1/2 at the DC and Nyquist bins,
matching the even-spectrum inverse DFT).  With warp 0 this reduces exactly
to the classic truncated real cepstrum; with warp > 0 it stays the exact
inverse of the synthesis direction on the truncated subspace.
"""

from __future__ import annotations

import numpy as np

LOG_FLOOR = 1e-10          # spectral bins below this are floored before log
ENERGY_FLOOR = 1e-12       # unit-sum factor for all-zero frames


def default_warp(sample_rate: int) -> float:
    """Mel-like warp constant by sample-rate family."""
    return 0.455 if sample_rate >= 20000 else 0.42


def warp_frequency(omega: np.ndarray, alpha: float) -> np.ndarray:
    """First-order all-pass phase response mapping [0, pi] onto itself."""
    return omega + 2.0 * np.arctan2(alpha * np.sin(omega), 1.0 - alpha * np.cos(omega))


def unit_sum_normalize(sp: np.ndarray):
    """Scale each frame to sum to one, returning the removed factor.

    Accepts a single frame [bins] or a stack [frames, bins].  All-zero
    frames are replaced by a uniform frame with the floor factor and
    reported in the degenerate mask.
    """
    sp = np.asarray(sp, dtype=np.float64)
    single = sp.ndim == 1
    frames = sp[None, :] if single else sp
    if np.any(frames < 0) or not np.all(np.isfinite(frames)):
        raise ValueError("spectral frames must be finite and non-negative")
    factor = frames.sum(axis=1)
    degenerate = factor <= 0.0
    safe = np.where(degenerate, 1.0, factor)
    norm = frames / safe[:, None]
    if np.any(degenerate):
        norm[degenerate] = 1.0 / frames.shape[1]
        factor = np.where(degenerate, ENERGY_FLOOR, factor)
    if single:
        return norm[0], float(factor[0]), bool(degenerate[0])
    return norm, factor, degenerate


_BASIS_CACHE: dict[tuple[int, int, float], tuple[np.ndarray, np.ndarray]] = {}


def _basis(n_bins: int, order: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """(synthesis matrix A, analysis matrix P) with log_sp ~= A @ mcc and
    mcc = P @ log_sp; P is the weighted pseudo-inverse of A."""
    key = (n_bins, order, float(alpha))
    hit = _BASIS_CACHE.get(key)
    if hit is not None:
        return hit
    k = np.arange(n_bins)
    omega = np.pi * k / (n_bins - 1)
    warped = warp_frequency(omega, alpha)
    n = np.arange(order + 1)
    a = np.cos(np.outer(warped, n))
    a[:, 1:] *= 2.0
    w = np.ones(n_bins)
    w[0] = w[-1] = 0.5
    aw = a * w[:, None]
    p = np.linalg.solve(aw.T @ a, aw.T)
    _BASIS_CACHE[key] = (a, p)
    return a, p


def sp_to_mcc(sp: np.ndarray, order: int = 34, alpha: float = 0.42) -> np.ndarray:
    """Warped cepstral coefficients of one frame or a stack of frames."""
    sp = np.asarray(sp, dtype=np.float64)
    n_bins = sp.shape[-1]
    if order + 1 > n_bins:
        raise ValueError(f"order {order} too high for {n_bins} bins")
    _, p = _basis(n_bins, order, alpha)
    logs = np.log(np.maximum(sp, LOG_FLOOR))
    return logs @ p.T


def mcc_to_sp(mcc: np.ndarray, fft_size: int = 512, alpha: float = 0.42) -> np.ndarray:
    """Magnitude-squared envelope from warped cepstral coefficients."""
    mcc = np.asarray(mcc, dtype=np.float64)
    if not np.all(np.isfinite(mcc)):
        raise ValueError("cepstral coefficients must be finite")
    n_bins = fft_size // 2 + 1
    a, _ = _basis(n_bins, mcc.shape[-1] - 1, alpha)
    return np.exp(mcc @ a.T)
