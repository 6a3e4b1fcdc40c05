import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tests import mfcc_oracle
from wavefuzz import signals
from wavefuzz.audio_io import AudioClip
from wavefuzz.mfcc import (
    ConfigError,
    MfccConfig,
    TooShortError,
    dct_cepstra,
    dct_matrix,
    delta,
    frame_and_window,
    hamming,
    hz_to_mel,
    log_mel,
    mel_filterbank,
    mfcc,
    power_spectrum,
    pre_emphasis,
)


# --- pre-emphasis --------------------------------------------------------------

def test_pre_emphasis_examples():
    np.testing.assert_allclose(pre_emphasis([1, 1, 1], 0.97), [1, 0.03, 0.03], atol=1e-15)
    np.testing.assert_allclose(pre_emphasis([0.5, -0.5], 0.97), [0.5, -0.985], atol=1e-15)
    x = np.array([0.3, -0.2, 0.7])
    assert np.array_equal(pre_emphasis(x, 0.0), x)


# --- framing ---------------------------------------------------------------------

def test_frame_count_one_second(cfg):
    frames = frame_and_window(np.zeros(16000), cfg, 16000)
    assert frames.shape == (98, 400)


def test_frame_count_half_second(cfg):
    assert mfcc(AudioClip(np.zeros(8000), 16000), cfg).frame_count == 48


def test_hamming_endpoints():
    w = hamming(400)
    assert w[0] == pytest.approx(0.08, abs=1e-15)
    assert w[-1] == pytest.approx(0.08, abs=1e-15)


def test_window_sum_closed_form(cfg):
    N = 400
    frames = frame_and_window(np.ones(N), cfg, 16000)
    # sum over n of cos(2 pi n/(N-1)) for n = 0..N-1 equals 1 (full period plus the endpoint)
    expected = 0.54 * N - 0.46 * 1.0
    assert frames.shape == (1, N)
    assert frames.sum() == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(frames[0], hamming(N))


def test_frame_offsets(cfg):
    x = np.arange(1000) / 1000.0
    frames = frame_and_window(x, cfg, 16000)
    w = hamming(400)
    np.testing.assert_allclose(frames[2], x[320:720] * w)


def test_too_short(cfg):
    with pytest.raises(TooShortError, match="too short"):
        frame_and_window(np.zeros(399), cfg, 16000)
    with pytest.raises(TooShortError):
        mfcc(AudioClip(np.zeros(100), 16000), cfg)


# --- power spectrum ----------------------------------------------------------------

def test_power_spectrum_zero_and_impulse():
    assert not np.any(power_spectrum(np.zeros(400), 512))
    imp = np.zeros(400)
    imp[0] = 1.0
    np.testing.assert_allclose(power_spectrum(imp, 512), np.full(257, 1 / 512), rtol=1e-14)


def test_power_spectrum_on_bin_cosine():
    n, k0 = 512, 37
    frame = np.cos(2 * np.pi * k0 * np.arange(n) / n)
    P = power_spectrum(frame, n)
    brute = mfcc_oracle.dft_power(frame.tolist(), n)
    np.testing.assert_allclose(P, brute, atol=1e-9)
    assert P[k0] == pytest.approx(n / 4, rel=1e-12)


def test_power_spectrum_matches_brute_force(rng):
    frame = rng.normal(size=400)
    np.testing.assert_allclose(power_spectrum(frame, 512),
                               mfcc_oracle.dft_power(frame.tolist(), 512), rtol=1e-9, atol=1e-12)


# --- mel filterbank --------------------------------------------------------------

def test_mel_formula():
    assert hz_to_mel(0.0) == 0.0
    assert hz_to_mel(700.0) == pytest.approx(781.17, abs=5e-3)
    assert hz_to_mel(700.0) == pytest.approx(2595 * math.log10(2), rel=1e-15)


def test_filterbank_rows(cfg):
    fb = mel_filterbank(cfg, 16000)
    assert fb.shape == (26, 257)
    for row in fb:
        assert row.min() >= 0
        assert row.max() == 1.0
        support = np.flatnonzero(row)
        assert np.all(np.diff(support) == 1)
        peak = int(np.argmax(row))
        assert np.all(np.diff(row[: peak + 1]) >= 0)
        assert np.all(np.diff(row[peak:]) <= 0)


def test_filterbank_flat_spectrum_row_sums(cfg):
    fb = mel_filterbank(cfg, 16000)
    brute = mfcc_oracle.triangles(26, 512, 16000, 0.0, 8000.0)
    flat = np.ones(257)
    np.testing.assert_allclose(fb @ flat, [sum(r) for r in brute], rtol=1e-12)


def test_filterbank_too_many_filters():
    with pytest.raises(ConfigError, match="too large"):
        mel_filterbank(MfccConfig(n_mels=200, n_ceps=13), 16000)


def test_filterbank_fmax_above_nyquist():
    with pytest.raises(ConfigError):
        mel_filterbank(MfccConfig(fmax_hz=9000.0), 16000)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.integers(0, 2**32 - 1))
def test_filterbank_linearity(a, b, seed):
    fb = mel_filterbank(MfccConfig(), 16000)
    r = np.random.default_rng(seed)
    P, Q = r.random(257), r.random(257)
    np.testing.assert_allclose(fb @ (a * P + b * Q), a * (fb @ P) + b * (fb @ Q),
                               rtol=1e-12, atol=1e-12)


# --- log mel -------------------------------------------------------------------------

def test_log_mel_zero_spectrum(cfg):
    fb = mel_filterbank(cfg, 16000)
    np.testing.assert_array_equal(log_mel(np.zeros(257), fb, 1e-10), np.full(26, math.log(1e-10)))


def test_log_mel_scaling(cfg, rng):
    fb = mel_filterbank(cfg, 16000)
    P = rng.random(257) + 0.1
    np.testing.assert_allclose(log_mel(3.7 * P, fb, 1e-10), log_mel(P, fb, 1e-10) + math.log(3.7),
                               rtol=1e-12)


def test_log_mel_brute_force(cfg):
    r = np.random.default_rng(7)
    P = r.random(257) ** 4
    fb = mel_filterbank(cfg, 16000)
    tri = mfcc_oracle.triangles(26, 512, 16000, 0.0, 8000.0)
    brute = [math.log(max(sum(h * p for h, p in zip(row, P)), 1e-10)) for row in tri]
    np.testing.assert_allclose(log_mel(P, fb, 1e-10), brute, rtol=1e-10)


# --- DCT ------------------------------------------------------------------------------

def test_dct_constant():
    c = dct_cepstra(np.full(26, 2.5), 13)
    assert c[0] == pytest.approx(2.5 * math.sqrt(26), rel=1e-14)
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-13)


def test_dct_orthonormal(rng):
    L = rng.normal(size=26)
    assert np.linalg.norm(dct_cepstra(L, 26)) == pytest.approx(np.linalg.norm(L), rel=1e-13)


def test_dct_brute_force():
    L = np.random.default_rng(3).normal(size=26)
    np.testing.assert_allclose(dct_cepstra(L, 13), mfcc_oracle.dct2(L.tolist(), 13), rtol=1e-12,
                               atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**32 - 1))
def test_dct_invertible(m, seed):
    L = np.random.default_rng(seed).normal(size=m)
    D = dct_matrix(m, m)
    np.testing.assert_allclose(dct_cepstra(L, m) @ D, L, atol=1e-10)


# --- deltas ---------------------------------------------------------------------------

def test_delta_constant_and_single_frame():
    assert not np.any(delta(np.full((7, 3), 4.2), 2))
    assert not np.any(delta(np.array([[1.0, -2.0]]), 2))


def test_delta_ramp_interior():
    c = np.arange(10, dtype=float)[:, None]
    d = delta(c, 2)
    np.testing.assert_allclose(d[2:-2, 0], 1.0, rtol=1e-15)


def test_delta_matches_oracle(rng):
    c = rng.normal(size=(9, 4))
    np.testing.assert_allclose(delta(c, 2), mfcc_oracle.deltas(c.tolist(), 2), rtol=1e-13)


# --- composition ----------------------------------------------------------------------

def test_silence(cfg):
    F = mfcc(signals.silence(), cfg).values
    np.testing.assert_allclose(F[:, 0], math.log(1e-10) * math.sqrt(26), rtol=1e-13)
    np.testing.assert_allclose(F[:, 1:], 0.0, atol=1e-11)


@settings(max_examples=25, deadline=None)
@given(st.integers(400, 6000), st.integers(0, 2**32 - 1))
def test_shape_finite_deterministic(n, seed):
    cfg = MfccConfig()
    x = np.random.default_rng(seed).uniform(-1, 1, n)
    clip = AudioClip(x, 16000)
    F = mfcc(clip, cfg)
    assert F.shape == (1 + (n - 400) // 160, 39)
    assert np.all(np.isfinite(F.values))
    assert np.array_equal(F.values, mfcc(clip, cfg).values)


def test_extreme_inputs_finite(cfg):
    for s in (np.ones(2000), -np.ones(2000), np.tile([1.0, -1.0], 1000)):
        assert np.all(np.isfinite(mfcc(AudioClip(s, 16000), cfg).values))


def test_time_shift_covariance(cfg, rng):
    x = rng.uniform(-0.5, 0.5, 4000)
    hop = 160
    a = mfcc(AudioClip(x[hop:], 16000), cfg).values
    b = mfcc(AudioClip(x, 16000), cfg).values
    W = 2 * cfg.delta_window  # delta-delta reach, frames affected by edge padding
    # static cepstra of frame t+1 of x equal frame t of the shifted signal, except the
    # first sample of each frame sees a different pre-emphasis predecessor only at t=0
    np.testing.assert_allclose(a[1:, :13], b[2:, :13], rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(a[W + 1:-W, 13:], b[W + 2:-W, 13:], rtol=1e-9, atol=1e-9)


def test_config_validation():
    with pytest.raises(ConfigError):
        MfccConfig(pre_emphasis_coeff=1.0)
    with pytest.raises(ConfigError):
        MfccConfig(n_fft=500)
    with pytest.raises(ConfigError):
        MfccConfig(n_ceps=30)
    with pytest.raises(ConfigError):
        MfccConfig(hop_length_ms=30.0)
    with pytest.raises(ConfigError):
        mfcc(signals.sine(), MfccConfig(n_fft=256))
