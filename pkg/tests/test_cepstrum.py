"""Unit-sum normalization and warped cepstrum round trips."""

import numpy as np
import pytest

from vclab.cepstrum import (ENERGY_FLOOR, mcc_to_sp, sp_to_mcc,
                            unit_sum_normalize, warp_frequency)

N_BINS = 257


class TestUnitSumNormalize:
    def test_uniform_frame(self):
        norm, factor, degen = unit_sum_normalize(np.full(N_BINS, 3.0))
        np.testing.assert_allclose(norm, 1.0 / N_BINS, rtol=1e-14)
        assert factor == pytest.approx(3.0 * N_BINS)
        assert not degen

    def test_round_trip_to_1e12(self):
        rng = np.random.default_rng(0)
        sp = rng.uniform(0.0, 5.0, size=(40, N_BINS))
        norm, factor, _ = unit_sum_normalize(sp)
        np.testing.assert_allclose(norm.sum(axis=1), 1.0, atol=1e-12)
        back = norm * factor[:, None]
        np.testing.assert_allclose(back, sp, rtol=1e-12)

    def test_all_zero_frame_floors_and_flags(self):
        norm, factor, degen = unit_sum_normalize(np.zeros(N_BINS))
        assert degen
        assert factor == ENERGY_FLOOR
        np.testing.assert_allclose(norm, 1.0 / N_BINS)

    def test_negative_bins_rejected(self):
        with pytest.raises(ValueError):
            unit_sum_normalize(np.full(N_BINS, -1.0))


class TestWarpedCepstrum:
    def test_flat_spectrum_gives_pure_log_level(self):
        mcc = sp_to_mcc(np.full(N_BINS, 2.5), order=34, alpha=0.42)
        assert mcc[0] == pytest.approx(np.log(2.5), abs=1e-10)
        np.testing.assert_allclose(mcc[1:], 0.0, atol=1e-10)

    def test_zero_mcc_gives_flat_unit_envelope(self):
        sp = mcc_to_sp(np.zeros(35), fft_size=512, alpha=0.42)
        np.testing.assert_allclose(sp, 1.0, atol=1e-12)

    def test_dc_only_mcc_gives_flat_level(self):
        sp = mcc_to_sp(np.array([1.7] + [0.0] * 34), fft_size=512, alpha=0.455)
        np.testing.assert_allclose(sp, np.exp(1.7), rtol=1e-12)

    def test_alpha_zero_reduces_to_plain_cepstrum(self):
        # oracle: real cepstrum of the even-extended log spectrum via irfft
        rng = np.random.default_rng(1)
        logs = rng.normal(size=N_BINS)
        cep = np.fft.irfft(logs)  # length 512, even
        expected = cep[:35].copy()
        got = sp_to_mcc(np.exp(logs), order=34, alpha=0.0)
        np.testing.assert_allclose(got, expected, atol=1e-10)

    @pytest.mark.parametrize("alpha", [0.0, 0.42, 0.455])
    def test_round_trip_on_truncated_subspace(self, alpha):
        rng = np.random.default_rng(2)
        decay = 0.8 ** np.arange(35)
        mcc = rng.normal(size=(20, 35)) * decay
        sp = mcc_to_sp(mcc, fft_size=512, alpha=alpha)
        back = sp_to_mcc(sp, order=34, alpha=alpha)
        err = np.abs(back - mcc) / np.maximum(np.abs(mcc), 1e-6)
        assert float(err.max()) <= 1e-9

    def test_smooth_envelope_round_trip_within_1db_rms(self):
        # generated smooth envelopes: speech-like 20-40 dB swings whose
        # cepstral content extends past the order-34 truncation
        rng = np.random.default_rng(3)
        for _ in range(20):
            src = 46
            rich = rng.normal(size=src) * (0.85 ** np.arange(src)) * 0.7
            cep = np.zeros(512)
            cep[:src] = rich
            cep[512 - src + 1:] = rich[1:][::-1]
            sp = np.exp(np.fft.rfft(cep).real)
            mcc = sp_to_mcc(sp, order=34, alpha=0.42)
            again = mcc_to_sp(mcc, fft_size=512, alpha=0.42)
            rms_db = np.sqrt(np.mean((10 * np.log10(again / sp)) ** 2))
            assert rms_db <= 1.0

    def test_order_too_high_rejected(self):
        with pytest.raises(ValueError):
            sp_to_mcc(np.ones(16), order=16)

    def test_non_finite_mcc_rejected(self):
        with pytest.raises(ValueError):
            mcc_to_sp(np.array([np.nan] + [0.0] * 34))

    def test_warp_is_monotone_and_spans_axis(self):
        w = warp_frequency(np.linspace(0, np.pi, 1000), 0.455)
        assert w[0] == pytest.approx(0.0)
        assert w[-1] == pytest.approx(np.pi)
        assert np.all(np.diff(w) > 0)
