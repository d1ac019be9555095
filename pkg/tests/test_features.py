"""FeatureTrack invariants and VCFT file round trips."""

import numpy as np
import pytest

from vclab.features import (CONVERTED, FeatureError, FeatureTrack, NATURAL,
                            RECONSTRUCTED, load_track, save_track)


def make_track(n=12, dim=35, kind=NATURAL, seed=0):
    rng = np.random.default_rng(seed)
    voiced = rng.random(n) > 0.4
    log_f0 = np.where(voiced, rng.uniform(4.5, 5.8, n), np.nan)
    return FeatureTrack(
        mcc=rng.normal(size=(n, dim)),
        log_f0=log_f0,
        voiced=voiced,
        energy_factor=rng.uniform(0.5, 2.0, n),
        frame_shift_ms=5.0,
        kind=kind,
    )


class TestInvariants:
    def test_length_mismatch_rejected(self):
        t = make_track()
        with pytest.raises(FeatureError):
            FeatureTrack(t.mcc, t.log_f0[:-1], t.voiced[:-1],
                         t.energy_factor[:-1], 5.0)

    def test_nonpositive_energy_rejected(self):
        t = make_track()
        bad = t.energy_factor.copy()
        bad[0] = 0.0
        with pytest.raises(FeatureError):
            FeatureTrack(t.mcc, t.log_f0, t.voiced, bad, 5.0)

    def test_log_f0_must_match_voicing(self):
        t = make_track()
        bad = t.log_f0.copy()
        bad[np.flatnonzero(t.voiced)[0]] = np.nan
        with pytest.raises(FeatureError):
            FeatureTrack(t.mcc, bad, t.voiced, t.energy_factor, 5.0)

    def test_unknown_kind_rejected(self):
        t = make_track()
        with pytest.raises(FeatureError):
            FeatureTrack(t.mcc, t.log_f0, t.voiced, t.energy_factor, 5.0, "weird")

    def test_samples_per_frame(self):
        assert make_track().samples_per_frame(16000) == 80
        with pytest.raises(FeatureError):
            FeatureTrack(np.zeros((2, 35)), [np.nan, np.nan], [False, False],
                         [1.0, 1.0], 5.1).samples_per_frame(16000)

    def test_continuous_log_f0_interpolates_gaps(self):
        track = FeatureTrack(
            mcc=np.zeros((4, 35)),
            log_f0=[5.0, np.nan, np.nan, 6.0],
            voiced=[True, False, False, True],
            energy_factor=np.ones(4),
            frame_shift_ms=5.0,
        )
        np.testing.assert_allclose(track.continuous_log_f0(),
                                   [5.0, 5.0 + 1 / 3, 5.0 + 2 / 3, 6.0])

    def test_continuous_log_f0_all_unvoiced_fallback(self):
        track = FeatureTrack(np.zeros((3, 35)), [np.nan] * 3, [False] * 3,
                             np.ones(3), 5.0)
        assert np.all(np.isfinite(track.continuous_log_f0()))


class TestFileRoundTrip:
    @pytest.mark.parametrize("kind", [NATURAL, RECONSTRUCTED, CONVERTED])
    def test_write_read_preserves_everything(self, tmp_path, kind):
        track = make_track(kind=kind, seed=3)
        path = tmp_path / "t.vcft"
        save_track(path, track)
        back = load_track(path)
        assert back.kind == kind
        assert back.frame_shift_ms == track.frame_shift_ms
        np.testing.assert_array_equal(back.voiced, track.voiced)
        # payloads are float32 on disk
        np.testing.assert_array_equal(back.mcc, track.mcc.astype(np.float32))
        np.testing.assert_array_equal(back.energy_factor,
                                      track.energy_factor.astype(np.float32))

    def test_byte_exact_round_trip(self, tmp_path):
        track = make_track(seed=4)
        p1 = tmp_path / "a.vcft"
        p2 = tmp_path / "b.vcft"
        save_track(p1, track)
        save_track(p2, load_track(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bad.vcft"
        path.write_bytes(b"JUNKxxxx")
        with pytest.raises(FeatureError):
            load_track(path)
