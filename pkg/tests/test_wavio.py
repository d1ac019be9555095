"""16-bit mono WAV round trips."""

import numpy as np
import pytest

from vclab.wavio import Waveform, read_wav, write_wav


def test_write_read_write_is_byte_exact(tmp_path):
    rng = np.random.default_rng(0)
    wave = Waveform(np.clip(rng.normal(0, 0.3, 4000), -1, 1), 16000)
    p1 = tmp_path / "a.wav"
    p2 = tmp_path / "b.wav"
    write_wav(p1, wave)
    write_wav(p2, read_wav(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_sample_rate_preserved(tmp_path):
    wave = Waveform(np.zeros(100), 22050)
    path = tmp_path / "sr.wav"
    write_wav(path, wave)
    assert read_wav(path).sample_rate == 22050


def test_quantization_error_bounded(tmp_path):
    rng = np.random.default_rng(1)
    x = np.clip(rng.normal(0, 0.4, 2000), -1, 1)
    path = tmp_path / "q.wav"
    write_wav(path, Waveform(x, 16000))
    back = read_wav(path).samples
    assert np.max(np.abs(back - x)) <= 1.0 / 32767


def test_non_finite_samples_rejected():
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]), 16000)


def test_stereo_rejected(tmp_path):
    import wave as wave_mod

    path = tmp_path / "st.wav"
    with wave_mod.open(str(path), "wb") as fh:
        fh.setnchannels(2)
        fh.setsampwidth(2)
        fh.setframerate(8000)
        fh.writeframes(b"\x00\x00\x00\x00" * 10)
    with pytest.raises(ValueError):
        read_wav(path)


def test_normalized_scales_peak():
    wave = Waveform(np.array([0.1, -0.2, 0.05]), 8000)
    out = wave.normalized(0.95)
    assert np.max(np.abs(out.samples)) == pytest.approx(0.95)
