"""Simplified waveform analysis/synthesis chain.

Analysis slices the signal at a fixed frame shift, estimates a smooth
magnitude-squared envelope per frame (short-time power spectrum smoothed
by cepstral liftering), removes the unit-sum energy factor, converts the
normalized envelope to warped cepstra, and tracks f0 with a normalized
autocorrelation detector.  Synthesis drives the envelopes with a pulse
train (voiced) or white noise (unvoiced) and reshapes it by weighted
overlap-add, which is the parametric-vocoder path of the lab.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as vrng
from .cepstrum import (ENERGY_FLOOR, LOG_FLOOR, default_warp, mcc_to_sp,
                       sp_to_mcc, unit_sum_normalize)
from .features import NATURAL, FeatureTrack
from .wavio import Waveform


@dataclass
class DspConfig:
    frame_shift_ms: float = 5.0
    fft_size: int = 512
    mcc_order: int = 34
    warp_alpha: float | None = None   # None: pick by sample rate
    f0_min: float = 70.0
    f0_max: float = 400.0
    voicing_threshold: float = 0.3
    # envelope lifter keeps quefrencies below the shortest trackable pitch
    # period (f0_max 400 Hz at 16 kHz -> lag 40) so harmonics never leak in
    lifter_cutoff: int = 40
    f0_window: int = 512              # samples in the f0 analysis window
    window_len: int | None = None     # spectral window; default fft_size // 2

    def alpha(self, sample_rate: int) -> float:
        return self.warp_alpha if self.warp_alpha is not None else default_warp(sample_rate)

    def win_len(self) -> int:
        w = self.window_len if self.window_len is not None else self.fft_size // 2
        if w > self.fft_size // 2:
            raise ValueError(f"window {w} violates fft_size >= 2 * frame length")
        return w


def analyze(wave: Waveform, config: DspConfig | None = None):
    """Extract (FeatureTrack, spectral envelopes [frames, bins]) from audio.

    Frame count is ceil(samples / shift); frame t is centered at t * shift.
    All-silence input yields a valid all-unvoiced track with the energy
    factor at its floor.
    """
    cfg = config or DspConfig()
    x = wave.samples
    if len(x) == 0:
        raise ValueError("cannot analyze an empty waveform")
    if cfg.fft_size & (cfg.fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {cfg.fft_size}")
    shift = _shift_samples(cfg, wave.sample_rate)
    win_len = cfg.win_len()
    n_frames = int(np.ceil(len(x) / shift))

    frames = _slice_frames(x, n_frames, shift, win_len)
    window = np.hanning(win_len)
    spec = np.abs(np.fft.rfft(frames * window, cfg.fft_size, axis=1)) ** 2
    envelopes = _lifter_envelope(spec, cfg.lifter_cutoff)

    norm, factor, _ = unit_sum_normalize(envelopes)
    # frames whose raw spectrum sits at/below the log floor carry no signal;
    # their envelope sum is floor-dominated, so pin the factor to the floor
    dead = spec.sum(axis=1) <= spec.shape[1] * LOG_FLOOR
    factor = np.where(dead, ENERGY_FLOOR, factor)
    mcc = sp_to_mcc(norm, cfg.mcc_order, cfg.alpha(wave.sample_rate))

    log_f0, voiced = _track_f0(x, n_frames, shift, cfg, wave.sample_rate)
    track = FeatureTrack(mcc=mcc, log_f0=log_f0, voiced=voiced,
                         energy_factor=factor, frame_shift_ms=cfg.frame_shift_ms,
                         kind=NATURAL)
    return track, envelopes


def baseline_synthesize(track: FeatureTrack, sample_rate: int,
                        config: DspConfig | None = None, seed: int = 0) -> Waveform:
    """Parametric resynthesis: pulse/noise excitation shaped per frame.

    Voiced frames are excited by a pulse train at exp(log_f0) with phase
    carried across frames; unvoiced frames by white noise.  Each frame of
    excitation is shaped to the track's envelope in the frequency domain
    and assembled by weighted overlap-add.  Output length is exactly
    frames * shift; frames whose energy factor sits at the degenerate
    floor stay silent.
    """
    cfg = config or DspConfig()
    shift = _shift_samples(cfg, sample_rate, track.frame_shift_ms)
    n = track.n_frames
    out_len = n * shift
    win_len = cfg.win_len()
    alpha = cfg.alpha(sample_rate)

    # frequency-domain filtering runs in a double-length buffer with the
    # windowed segment centered, so both tails of the zero-phase envelope
    # response land at the right times instead of wrapping circularly
    fft_buf = 2 * cfg.fft_size
    offset = (fft_buf - win_len) // 2
    pad = fft_buf
    envelopes = mcc_to_sp(track.mcc, fft_buf, alpha) * track.energy_factor[:, None]
    excitation = _make_excitation(track, shift, sample_rate, seed, pad)

    window = np.hanning(win_len)
    win_power = float(np.sum(window ** 2))
    half = win_len // 2
    buf = np.zeros(out_len + 2 * pad)
    norm = np.zeros(out_len + 2 * pad)
    live = track.energy_factor > ENERGY_FLOOR
    frame = np.zeros(fft_buf)
    for t in range(n):
        if not live[t]:
            continue
        center = t * shift
        seg = excitation[pad + center - half: pad + center - half + win_len]
        frame[:] = 0.0
        frame[offset:offset + win_len] = seg * window
        spec = np.fft.rfft(frame)
        spec *= np.sqrt(envelopes[t] / win_power)
        shaped = np.fft.irfft(spec, fft_buf)
        start = pad + center - half - offset
        buf[start:start + fft_buf] += shaped
        norm[pad + center - half: pad + center - half + win_len] += window
    flat = buf[pad:pad + out_len] / np.maximum(norm[pad:pad + out_len], 0.1)
    peak = np.max(np.abs(flat)) if out_len else 0.0
    if peak > 1.0:
        flat *= 0.99 / peak
    return Waveform(flat, sample_rate)


# ---------------------------------------------------------------------------
# internals
# ---------------------------------------------------------------------------

def _shift_samples(cfg: DspConfig, sample_rate: int, shift_ms: float | None = None) -> int:
    ms = cfg.frame_shift_ms if shift_ms is None else shift_ms
    shift = ms * sample_rate / 1000.0
    if abs(shift - round(shift)) > 1e-9 or round(shift) < 1:
        raise ValueError(f"frame shift {ms} ms is not a whole sample count at {sample_rate} Hz")
    return int(round(shift))


def _slice_frames(x: np.ndarray, n_frames: int, shift: int, win_len: int) -> np.ndarray:
    half = win_len // 2
    padded = np.concatenate([np.zeros(half), x,
                             np.zeros(max(0, (n_frames - 1) * shift + half + 1 - len(x)))])
    out = np.empty((n_frames, win_len))
    for t in range(n_frames):
        start = t * shift  # == center - half in padded coordinates
        out[t] = padded[start:start + win_len]
    return out


def _lifter_envelope(power_spec: np.ndarray, cutoff: int) -> np.ndarray:
    """Smooth log power spectra by zeroing high-quefrency cepstral bins."""
    logs = np.log(np.maximum(power_spec, LOG_FLOOR))
    cep = np.fft.irfft(logs, axis=1)
    n = cep.shape[1]
    keep = np.zeros(n)
    keep[:cutoff] = 1.0
    keep[n - cutoff + 1:] = 1.0
    smooth = np.fft.rfft(cep * keep, axis=1).real
    return np.exp(smooth)


def _track_f0(x: np.ndarray, n_frames: int, shift: int, cfg: DspConfig,
              sample_rate: int):
    """Normalized-autocorrelation f0 with parabolic peak refinement.

    Among lags whose correlation reaches 90% of the frame's best, the
    shortest one wins, which suppresses octave-down errors.
    """
    w = cfg.f0_window
    lag_min = max(2, int(np.floor(sample_rate / cfg.f0_max)))
    lag_max = int(np.ceil(sample_rate / cfg.f0_min))
    if lag_max + 2 >= w:
        raise ValueError(f"f0 window {w} too short for f0_min {cfg.f0_min}")
    half = w // 2
    padded = np.concatenate([np.zeros(half), x,
                             np.zeros(max(0, (n_frames - 1) * shift + half + 1 - len(x)))])
    log_f0 = np.full(n_frames, np.nan)
    voiced = np.zeros(n_frames, dtype=bool)
    for t in range(n_frames):
        seg = padded[t * shift: t * shift + w]
        if np.max(np.abs(seg)) < 1e-6:
            continue
        r = _norm_autocorr(seg, lag_max)
        band = r[lag_min:lag_max + 1]
        best = float(band.max())
        if best < cfg.voicing_threshold:
            continue
        lag = _pick_lag(r, lag_min, lag_max, best)
        refined = _parabolic(r, lag)
        f0 = sample_rate / refined
        if cfg.f0_min * 0.9 <= f0 <= cfg.f0_max * 1.1:
            voiced[t] = True
            log_f0[t] = np.log(f0)
    return log_f0, voiced


def _norm_autocorr(seg: np.ndarray, lag_max: int) -> np.ndarray:
    n = len(seg)
    size = int(2 ** np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(seg, size)
    raw = np.fft.irfft(spec * np.conj(spec), size)[:lag_max + 2]
    sq = np.concatenate([[0.0], np.cumsum(seg * seg)])
    lags = np.arange(lag_max + 2)
    head = sq[n - lags] - sq[0]       # energy of seg[:n-lag]
    tail = sq[n] - sq[lags]           # energy of seg[lag:]
    return raw / np.sqrt(head * tail + 1e-20)


def _pick_lag(r: np.ndarray, lag_min: int, lag_max: int, best: float) -> int:
    good = 0.9 * best
    for lag in range(lag_min, lag_max + 1):
        if r[lag] >= good and r[lag] >= r[lag - 1] and r[lag] >= r[lag + 1]:
            return lag
    return lag_min + int(np.argmax(r[lag_min:lag_max + 1]))


def _parabolic(r: np.ndarray, lag: int) -> float:
    if lag <= 0 or lag + 1 >= len(r):
        return float(lag)
    a, b, c = r[lag - 1], r[lag], r[lag + 1]
    denom = a - 2 * b + c
    if abs(denom) < 1e-12:
        return float(lag)
    delta = 0.5 * (a - c) / denom
    return float(lag + np.clip(delta, -1.0, 1.0))


def _make_excitation(track: FeatureTrack, shift: int, sample_rate: int,
                     seed: int, pad: int) -> np.ndarray:
    """Unit-power excitation, padded by `pad` samples on each side."""
    n = track.n_frames
    out_len = n * shift
    gen = vrng.stream(seed, vrng.TAG_NOISE)
    exc = gen.standard_normal(out_len + 2 * pad)
    # pulse train with phase carried across consecutive voiced samples
    phase = 0.0
    f0 = np.exp(track.continuous_log_f0())
    for t in range(n):
        if not track.voiced[t]:
            phase = 0.0
            continue
        period = sample_rate / f0[t]
        amp = np.sqrt(period)
        for i in range(t * shift, (t + 1) * shift):
            phase += 1.0
            if phase >= period:
                phase -= period
                exc[pad + i] = amp
            else:
                exc[pad + i] = 0.0
    return exc
