"""Analysis/synthesis chain on known synthetic inputs."""

import numpy as np
import pytest

from vclab.cepstrum import ENERGY_FLOOR
from vclab.dsp import DspConfig, analyze, baseline_synthesize
from vclab.features import FeatureTrack
from vclab.metrics import mean_mcd
from vclab.wavio import Waveform

RATE = 16000


def sawtooth(freq, seconds, rate=RATE, amp=0.6):
    t = np.arange(int(seconds * rate)) / rate
    return Waveform(amp * (2.0 * ((t * freq) % 1.0) - 1.0), rate)


class TestAnalyze:
    def test_sawtooth_is_voiced_at_the_right_pitch(self):
        track, _ = analyze(sawtooth(220.0, 1.0))
        assert np.all(track.voiced)
        median_f0 = np.exp(np.median(track.log_f0))
        assert abs(median_f0 - 220.0) / 220.0 <= 0.03

    def test_white_noise_is_mostly_unvoiced(self):
        rng = np.random.default_rng(11)
        wave = Waveform(0.3 * rng.standard_normal(RATE), RATE)
        track, _ = analyze(wave)
        assert np.mean(~track.voiced) >= 0.90

    def test_zero_signal_gives_unvoiced_floored_track(self):
        track, _ = analyze(Waveform(np.zeros(RATE // 2), RATE))
        assert not np.any(track.voiced)
        assert np.all(track.energy_factor == ENERGY_FLOOR)

    def test_frame_count_is_ceil_samples_over_shift(self):
        wave = Waveform(np.zeros(1001), RATE)
        track, _ = analyze(wave)
        assert track.n_frames == int(np.ceil(1001 / 80))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            analyze(Waveform(np.zeros(0), RATE))

    def test_envelopes_match_track_energy(self):
        track, envelopes = analyze(sawtooth(200.0, 0.5))
        np.testing.assert_allclose(envelopes.sum(axis=1), track.energy_factor,
                                   rtol=1e-9)


class TestSynthesize:
    def test_output_length_is_frames_times_shift(self):
        track, _ = analyze(sawtooth(180.0, 0.37))
        wave = baseline_synthesize(track, RATE)
        assert len(wave) == track.n_frames * 80

    def test_constant_f0_track_resynthesizes_near_200hz(self):
        track, _ = analyze(sawtooth(200.0, 1.0))
        wave = baseline_synthesize(track, RATE)
        again, _ = analyze(wave)
        assert np.mean(again.voiced) > 0.8
        f0 = np.exp(np.median(again.log_f0[again.voiced]))
        assert abs(f0 - 200.0) / 200.0 <= 0.05

    def test_zero_energy_track_yields_silence(self):
        n = 40
        track = FeatureTrack(
            mcc=np.zeros((n, 35)),
            log_f0=np.full(n, np.nan),
            voiced=np.zeros(n, dtype=bool),
            energy_factor=np.full(n, ENERGY_FLOOR),
            frame_shift_ms=5.0,
        )
        wave = baseline_synthesize(track, RATE)
        assert np.all(wave.samples == 0.0)

    def test_unvoiced_track_env_matches_mcc_within_3db_band_average(self):
        # noise shaped by a known smooth envelope, then re-analyzed
        rng = np.random.default_rng(5)
        n = 150
        base = np.zeros(35)
        base[0] = -2.0
        base[1:6] = rng.normal(size=5) * 0.8
        track = FeatureTrack(
            mcc=np.tile(base, (n, 1)),
            log_f0=np.full(n, np.nan),
            voiced=np.zeros(n, dtype=bool),
            energy_factor=np.full(n, 1.0),
            frame_shift_ms=5.0,
        )
        wave = baseline_synthesize(track, RATE)
        again, envelopes = analyze(wave)
        from vclab.cepstrum import mcc_to_sp, unit_sum_normalize

        want = mcc_to_sp(base[None, :], 512, 0.42)[0]
        want /= want.sum()
        got, _, _ = unit_sum_normalize(envelopes.mean(axis=0))
        bands = np.array_split(np.arange(257), 8)
        for band in bands:
            ratio_db = 10 * np.log10(got[band].mean() / want[band].mean())
            assert abs(ratio_db) <= 3.0

    def test_analysis_synthesis_loop_mcd_bounded(self):
        track1, _ = analyze(sawtooth(170.0, 1.0))
        wave2 = baseline_synthesize(track1, RATE)
        track2, _ = analyze(wave2)
        n = min(track1.n_frames, track2.n_frames)
        loop = mean_mcd(track1.mcc[:n], track2.mcc[:n], align="none")
        assert loop <= 2.5
