"""Objective distances: mel-cepstral distortion and DTW alignment.

MCD between two cepstral vectors excludes the energy term (dim 0) and is
the scaled Euclidean distance (10 / ln 10) * sqrt(2 * sum of squared
coefficient differences), in dB.  DTW uses the unconstrained step set
{(1,0), (0,1), (1,1)} with per-cell cost given by frame MCD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MCD_SCALE = (10.0 / np.log(10.0)) * np.sqrt(2.0)


def mcd_frame(c1: np.ndarray, c2: np.ndarray) -> float:
    """MCD in dB between two MCC vectors of dims 1..order (dim 0 excluded)."""
    a = np.asarray(c1, dtype=np.float64)
    b = np.asarray(c2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")
    d = a[1:] - b[1:]
    return float(MCD_SCALE * np.sqrt(np.sum(d * d)))


def mcd_matrix(seq_a: np.ndarray, seq_b: np.ndarray) -> np.ndarray:
    """Pairwise frame MCDs: [len(a), len(b)], dims 1.. of each MCC row."""
    a = np.asarray(seq_a, dtype=np.float64)[:, 1:]
    b = np.asarray(seq_b, dtype=np.float64)[:, 1:]
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dim mismatch: {a.shape[1] + 1} vs {b.shape[1] + 1}")
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    return MCD_SCALE * np.sqrt(np.maximum(sq, 0.0))


@dataclass
class AlignmentPath:
    pairs: list[tuple[int, int]]
    total_cost: float

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("alignment path cannot be empty")


def dtw_align(seq_a: np.ndarray, seq_b: np.ndarray,
              cost: np.ndarray | None = None) -> AlignmentPath:
    """Minimal-cost monotone alignment between two MCC sequences.

    The path starts at (0, 0), ends at (I-1, J-1), and moves by one of
    {(1,0), (0,1), (1,1)} per step.  Frame cost defaults to MCD.
    """
    c = mcd_matrix(seq_a, seq_b) if cost is None else np.asarray(cost, dtype=np.float64)
    ni, nj = c.shape
    if ni == 0 or nj == 0:
        raise ValueError("cannot align empty sequences")
    acc = np.full((ni, nj), np.inf)
    move = np.zeros((ni, nj), dtype=np.int8)  # 0 diag, 1 up (i-1), 2 left (j-1)
    acc[0, 0] = c[0, 0]
    for j in range(1, nj):
        acc[0, j] = acc[0, j - 1] + c[0, j]
        move[0, j] = 2
    for i in range(1, ni):
        acc[i, 0] = acc[i - 1, 0] + c[i, 0]
        move[i, 0] = 1
        row = acc[i]
        prev = acc[i - 1]
        for j in range(1, nj):
            best = prev[j - 1]
            m = 0
            if prev[j] < best:
                best = prev[j]
                m = 1
            if row[j - 1] < best:
                best = row[j - 1]
                m = 2
            row[j] = best + c[i, j]
            move[i, j] = m
    pairs = [(ni - 1, nj - 1)]
    i, j = ni - 1, nj - 1
    while (i, j) != (0, 0):
        m = move[i, j]
        if m == 0:
            i, j = i - 1, j - 1
        elif m == 1:
            i -= 1
        else:
            j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return AlignmentPath(pairs=pairs, total_cost=float(acc[ni - 1, nj - 1]))


def mean_mcd(seq_a: np.ndarray, seq_b: np.ndarray, align: str = "none") -> float:
    """Mean frame MCD, either frame-by-frame or along the optimal DTW path."""
    if align == "none":
        a = np.asarray(seq_a)
        b = np.asarray(seq_b)
        if len(a) != len(b):
            raise ValueError(f"align='none' needs equal lengths, got {len(a)} vs {len(b)}")
        c = mcd_matrix(a, b)
        return float(np.mean(np.diagonal(c)))
    if align == "dtw":
        c = mcd_matrix(seq_a, seq_b)
        path = dtw_align(seq_a, seq_b, cost=c)
        costs = [c[i, j] for i, j in path.pairs]
        return float(np.mean(costs))
    raise ValueError(f"unknown alignment mode {align!r}")
