"""Per-frame acoustic feature tracks and their on-disk format ("VCFT").

A track carries, per frame: a 35-dim warped-cepstrum vector (dim 0 is the
cepstral energy term), natural-log f0 where voiced (NaN elsewhere), the
voicing flag, and the positive unit-sum energy factor removed from the
spectral envelope.  The `kind` tag records which stage produced the track:
analysis (natural), VAE self-reconstruction, or VAE conversion.

VCFT layout, little-endian:

    magic    4 bytes  b"VCFT"
    version  u32 = 1
    kind     u8 (0 natural, 1 reconstructed, 2 converted)
    shift    f64 frame shift in ms
    frames   u32, mcc dim u32
    mcc      f32 [frames * dim]
    energy   f32 [frames]
    log_f0   f32 [frames] (NaN on unvoiced frames)
    voiced   u8  [frames]

Payloads are stored in float32; write(read(path)) is byte-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"VCFT"
VERSION = 1

NATURAL = "natural"
RECONSTRUCTED = "reconstructed"
CONVERTED = "converted"
KINDS = (NATURAL, RECONSTRUCTED, CONVERTED)


class FeatureError(RuntimeError):
    pass


@dataclass
class FeatureTrack:
    mcc: np.ndarray           # [frames, dim], dim 0 = cepstral energy term
    log_f0: np.ndarray        # [frames], NaN where unvoiced
    voiced: np.ndarray        # [frames] bool
    energy_factor: np.ndarray  # [frames], > 0
    frame_shift_ms: float
    kind: str = NATURAL

    def __post_init__(self):
        self.mcc = np.asarray(self.mcc, dtype=np.float64)
        self.log_f0 = np.asarray(self.log_f0, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        self.energy_factor = np.asarray(self.energy_factor, dtype=np.float64)
        n = self.mcc.shape[0]
        if self.mcc.ndim != 2:
            raise FeatureError(f"mcc must be [frames, dim], got {self.mcc.shape}")
        for name, arr in (("log_f0", self.log_f0), ("voiced", self.voiced),
                          ("energy_factor", self.energy_factor)):
            if arr.shape != (n,):
                raise FeatureError(f"{name} length {arr.shape} != frame count {n}")
        if self.kind not in KINDS:
            raise FeatureError(f"unknown track kind {self.kind!r}")
        if np.any(self.energy_factor <= 0):
            raise FeatureError("energy_factor must be positive on every frame")
        voiced_ok = np.isfinite(self.log_f0) == self.voiced
        if not np.all(voiced_ok):
            raise FeatureError("log_f0 must be present exactly on voiced frames")

    @property
    def n_frames(self) -> int:
        return self.mcc.shape[0]

    def samples_per_frame(self, sample_rate: int) -> int:
        spf = self.frame_shift_ms * sample_rate / 1000.0
        if abs(spf - round(spf)) > 1e-9:
            raise FeatureError(
                f"frame shift {self.frame_shift_ms} ms is not integer samples at {sample_rate} Hz")
        return int(round(spf))

    def copy(self, kind: str | None = None) -> "FeatureTrack":
        return FeatureTrack(self.mcc.copy(), self.log_f0.copy(), self.voiced.copy(),
                            self.energy_factor.copy(), self.frame_shift_ms,
                            kind or self.kind)

    def continuous_log_f0(self) -> np.ndarray:
        """log-f0 with unvoiced gaps linearly interpolated (endpoints held).

        All-unvoiced tracks fall back to a flat nominal 100 Hz contour.
        """
        out = self.log_f0.copy()
        idx = np.flatnonzero(self.voiced)
        if idx.size == 0:
            return np.full(self.n_frames, np.log(100.0))
        t = np.arange(self.n_frames, dtype=np.float64)
        return np.interp(t, t[idx], out[idx])


def save_track(path: str | Path, track: FeatureTrack) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<B", KINDS.index(track.kind))
    blob += struct.pack("<d", float(track.frame_shift_ms))
    n, dim = track.mcc.shape
    blob += struct.pack("<II", n, dim)
    blob += track.mcc.astype("<f4").tobytes()
    blob += track.energy_factor.astype("<f4").tobytes()
    blob += track.log_f0.astype("<f4").tobytes()
    blob += track.voiced.astype(np.uint8).tobytes()
    Path(path).write_bytes(bytes(blob))


def load_track(path: str | Path) -> FeatureTrack:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise FeatureError(f"{path}: not a VCFT file (bad magic)")
    off = 4
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != VERSION:
        raise FeatureError(f"{path}: unsupported VCFT version {version}")
    kind_tag = blob[off]
    off += 1
    if kind_tag >= len(KINDS):
        raise FeatureError(f"{path}: unknown kind tag {kind_tag}")
    (shift,) = struct.unpack_from("<d", blob, off)
    off += 8
    n, dim = struct.unpack_from("<II", blob, off)
    off += 8
    mcc = np.frombuffer(blob, "<f4", n * dim, off).reshape(n, dim)
    off += 4 * n * dim
    energy = np.frombuffer(blob, "<f4", n, off)
    off += 4 * n
    log_f0 = np.frombuffer(blob, "<f4", n, off)
    off += 4 * n
    voiced = np.frombuffer(blob, np.uint8, n, off).astype(bool)
    off += n
    if off != len(blob):
        raise FeatureError(f"{path}: {len(blob) - off} trailing bytes")
    return FeatureTrack(mcc.astype(np.float64), log_f0.astype(np.float64),
                        voiced, energy.astype(np.float64), shift, KINDS[kind_tag])
