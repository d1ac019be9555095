"""Mu-law companding: extremes, monotonicity, round-trip bounds."""

import numpy as np

from vclab.mulaw import mu_law_decode, mu_law_encode


def test_extremes_hit_code_bounds():
    assert mu_law_encode(1.0) == 255
    assert mu_law_encode(-1.0) == 0


def test_zero_round_trip_error_is_tiny():
    err = abs(float(mu_law_decode(mu_law_encode(0.0))))
    assert err <= 1.0 / (128 * np.log(256))


def test_dense_grid_round_trip_error_below_0p03():
    # brute-force grid; the worst case sits near |x| = 1
    x = np.arange(-1.0, 1.0 + 1e-9, 1e-4)
    err = np.abs(mu_law_decode(mu_law_encode(x)) - x)
    assert float(err.max()) <= 0.03


def test_encode_is_monotone_non_decreasing():
    x = np.linspace(-1.0, 1.0, 20001)
    codes = mu_law_encode(x)
    assert np.all(np.diff(codes) >= 0)


def test_decode_encode_is_identity_on_all_codes():
    codes = np.arange(256)
    again = mu_law_encode(mu_law_decode(codes))
    np.testing.assert_array_equal(again, codes)


def test_out_of_range_clamps_and_counts():
    from vclab import mulaw

    before = mulaw.clamp_count
    assert mu_law_encode(1.5) == 255
    assert mu_law_encode(-2.0) == 0
    assert mulaw.clamp_count == before + 2


def test_decode_rejects_out_of_range_codes():
    import pytest

    with pytest.raises(ValueError):
        mu_law_decode([256])
