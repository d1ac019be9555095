"""Mono 16-bit PCM WAV handling and the in-memory Waveform type."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SCALE = 32767.0


@dataclass
class Waveform:
    """Mono audio: float samples in [-1, 1] plus the sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def normalized(self, peak: float = 0.95) -> "Waveform":
        """Scale so the absolute peak is `peak` (no-op for silence)."""
        m = np.max(np.abs(self.samples)) if len(self.samples) else 0.0
        if m == 0.0:
            return Waveform(self.samples.copy(), self.sample_rate)
        return Waveform(self.samples * (peak / m), self.sample_rate)


def write_wav(path: str | Path, wav: Waveform) -> None:
    pcm = np.clip(np.rint(wav.samples * _SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wav.sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> Waveform:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / _SCALE, rate)
