"""Synthetic parallel toy corpus of vowel-like speakers.

Each speaker is a parametric source-filter voice: a pulse train through a
cascade of formant resonators with a speaker-specific formant scale,
spectral tilt, and log-f0 distribution.  Utterance *content* (the vowel
sequence and nominal timing) is keyed by utterance index only, so every
speaker utters the same sentences with their own voice and timing jitter:
a parallel corpus without any alignment metadata.

Everything is deterministic per seed; the same seed yields byte-identical
WAV files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import rng as vrng
from .wavio import Waveform, write_wav

TRAIN = "train"
TEST = "test"

# canonical vowel formants (Hz) and bandwidths, scaled per speaker
_VOWELS = {
    "a": ((730, 90), (1090, 110), (2440, 160)),
    "e": ((530, 80), (1840, 120), (2480, 160)),
    "i": ((270, 60), (2290, 140), (3010, 180)),
    "o": ((570, 80), (840, 100), (2410, 160)),
    "u": ((300, 60), (870, 100), (2240, 150)),
}
_VOWEL_IDS = sorted(_VOWELS)

_F0_BASE = 140.0
_F0_RATIO = 1.26    # ln gap 0.23 between adjacent speakers
_F0_CEIL = 300.0


class CorpusError(RuntimeError):
    pass


@dataclass
class SpeakerVoice:
    """Parameters of one synthetic speaker."""

    id: str
    f0_mean: float          # Hz
    f0_sigma: float         # std of log-f0 walk
    formant_scale: float
    tilt_pole: float        # one-pole lowpass coefficient


@dataclass
class CorpusManifest:
    """Speaker list plus (speaker, split, path) rows; paths relative to root."""

    root: Path
    speakers: list[str]
    entries: list[tuple[str, str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)
        seen = set()
        for spk, split, rel in self.entries:
            if split not in (TRAIN, TEST):
                raise CorpusError(f"unknown split {split!r}")
            if spk not in self.speakers:
                raise CorpusError(f"entry references unknown speaker {spk!r}")
            if rel in seen:
                raise CorpusError(f"utterance {rel!r} listed twice")
            seen.add(rel)

    def utterances(self, speaker: str, split: str) -> list[Path]:
        return [self.root / rel for spk, sp, rel in self.entries
                if spk == speaker and sp == split]

    def save(self, path: str | Path) -> None:
        lines = ["# vclab corpus manifest: speaker<TAB>split<TAB>path"]
        lines += [f"{spk}\t{split}\t{rel}" for spk, split, rel in self.entries]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusManifest":
        path = Path(path)
        entries = []
        speakers: list[str] = []
        for line in path.read_text().splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path}: malformed manifest line {line!r}")
            spk, split, rel = parts
            if spk not in speakers:
                speakers.append(spk)
            entries.append((spk, split, rel))
        return cls(root=path.parent, speakers=speakers, entries=entries)


def speaker_voices(seed: int, n_speakers: int) -> list[SpeakerVoice]:
    if n_speakers < 2:
        raise CorpusError("toy corpus needs at least 2 speakers")
    ratio = _F0_RATIO
    if _F0_BASE * ratio ** (n_speakers - 1) > _F0_CEIL:
        ratio = (_F0_CEIL / _F0_BASE) ** (1.0 / (n_speakers - 1))
    if np.log(ratio) <= 0.1:
        raise CorpusError(f"cannot separate {n_speakers} speakers by >0.1 in log-f0")
    voices = []
    for i in range(n_speakers):
        gen = vrng.stream(seed, vrng.TAG_CORPUS, 1, i)
        voices.append(SpeakerVoice(
            id=f"spk{i}",
            f0_mean=_F0_BASE * ratio ** i,
            f0_sigma=0.06 + 0.04 * gen.random(),
            formant_scale=0.88 + 0.10 * i + 0.02 * gen.random(),
            tilt_pole=0.15 + 0.45 * i / max(1, n_speakers - 1),
        ))
    return voices


def make_toy_corpus(out_dir: str | Path, seed: int, n_speakers: int = 4,
                    train_utts: int = 20, test_utts: int = 5,
                    utt_seconds: float = 1.0,
                    sample_rate: int = 16000) -> CorpusManifest:
    """Generate WAVs plus a manifest under `out_dir`.

    Content is parallel across speakers; timing, pitch, and voice differ.
    """
    out_dir = Path(out_dir)
    voices = speaker_voices(seed, n_speakers)
    entries = []
    for split, count, tag in ((TRAIN, train_utts, 0), (TEST, test_utts, 1000)):
        for u in range(count):
            content = _utterance_content(seed, tag + u, utt_seconds)
            for si, voice in enumerate(voices):
                wave = _render_utterance(content, voice, sample_rate,
                                         vrng.stream(seed, vrng.TAG_CORPUS, 2,
                                                     si, tag + u))
                rel = f"wav/{voice.id}/{split}_{u:03d}.wav"
                path = out_dir / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                write_wav(path, wave)
                entries.append((voice.id, split, rel))
    manifest = CorpusManifest(root=out_dir, speakers=[v.id for v in voices],
                              entries=entries)
    manifest.save(out_dir / "manifest.txt")
    return manifest


# ---------------------------------------------------------------------------
# synthesis internals
# ---------------------------------------------------------------------------

def _utterance_content(seed: int, utt_index: int, utt_seconds: float):
    """Vowel sequence with nominal durations; shared by all speakers."""
    gen = vrng.stream(seed, vrng.TAG_CORPUS, 3, utt_index)
    segments = []
    total = 0.0
    lead = 0.02 + 0.02 * gen.random()
    total += lead
    # long vowels with short gaps: every vowel/silence boundary costs a few
    # frames whose windows straddle the transition, so fewer boundaries keep
    # the analysis/synthesis loop tight
    while total < utt_seconds - 0.1:
        vowel = _VOWEL_IDS[gen.integers(len(_VOWEL_IDS))]
        dur = 0.16 + 0.14 * gen.random()
        gap = 0.02 + 0.03 * gen.random()
        segments.append((vowel, dur, gap))
        total += dur + gap
    # normalized f0 contour knots, one per segment boundary
    knots = np.clip(gen.standard_normal(len(segments) + 1), -1.8, 1.8)
    return {"lead": lead, "segments": segments, "f0_knots": knots}


def _render_utterance(content, voice: SpeakerVoice, rate: int,
                      gen: np.random.Generator) -> Waveform:
    pieces = [np.zeros(int(content["lead"] * rate * (0.8 + 0.4 * gen.random())))]
    knots = content["f0_knots"]
    for k, (vowel, dur, gap) in enumerate(content["segments"]):
        dur_jit = dur * (0.85 + 0.3 * gen.random())
        n = max(1, int(dur_jit * rate))
        lf0 = (np.log(voice.f0_mean)
               + voice.f0_sigma * np.linspace(knots[k], knots[k + 1], n))
        seg = _render_vowel(vowel, lf0, voice, rate, gen)
        pieces.append(seg)
        pieces.append(np.zeros(int(gap * rate * (0.8 + 0.4 * gen.random()))))
    x = np.concatenate(pieces)
    peak = np.max(np.abs(x)) if len(x) else 0.0
    if peak > 0:
        x *= (0.4 + 0.2 * gen.random()) / peak
    return Waveform(x, rate)


def _render_vowel(vowel: str, log_f0: np.ndarray, voice: SpeakerVoice,
                  rate: int, gen: np.random.Generator) -> np.ndarray:
    n = len(log_f0)
    f0 = np.exp(log_f0)
    # pulse train wherever the accumulated cycle count crosses an integer,
    # plus breathy aspiration noise; pulse height sqrt(period) gives unit
    # power.  The noise floor matters: it is the signal component whose
    # sample-level statistics depend on the spectral envelope, which is what
    # makes envelope conditioning informative for the vocoder.
    exc = 0.25 * gen.standard_normal(n)
    cycles = np.concatenate([[0.999], 0.999 + np.cumsum(f0 / rate)])
    pulse_idx = np.flatnonzero(np.diff(np.floor(cycles)) > 0)
    exc[pulse_idx] += np.sqrt(rate / f0[pulse_idx])
    y = exc
    for freq, bw in _VOWELS[vowel]:
        fs = freq * voice.formant_scale * (1.0 + 0.03 * gen.standard_normal())
        r = np.exp(-np.pi * bw / rate)
        theta = 2.0 * np.pi * fs / rate
        b = [1.0 - r]
        a = [1.0, -2.0 * r * np.cos(theta), r * r]
        y = lfilter(b, a, y)
    y = lfilter([1.0 - voice.tilt_pole], [1.0, -voice.tilt_pole], y)
    rms = np.sqrt(np.mean(y * y)) + 1e-12
    y = y / rms
    ramp = min(n // 4, int(0.01 * rate))
    if ramp > 0:
        y[:ramp] *= np.linspace(0.0, 1.0, ramp)
        y[-ramp:] *= np.linspace(1.0, 0.0, ramp)
    return y
