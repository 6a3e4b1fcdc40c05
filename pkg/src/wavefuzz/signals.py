"""Deterministic test signals."""

import numpy as np

from .audio_io import AudioClip


def _t(duration_s, sample_rate):
    return np.arange(int(round(duration_s * sample_rate))) / sample_rate


def silence(duration_s=0.5, sample_rate=16000) -> AudioClip:
    return AudioClip(np.zeros(int(round(duration_s * sample_rate))), sample_rate)


def impulse(duration_s=0.5, sample_rate=16000, at=1000, amplitude=0.9) -> AudioClip:
    s = np.zeros(int(round(duration_s * sample_rate)))
    s[at] = amplitude
    return AudioClip(s, sample_rate)


def sine(freq=440.0, amplitude=0.5, duration_s=0.5, sample_rate=16000) -> AudioClip:
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * _t(duration_s, sample_rate)), sample_rate)


def chirp(f0=200.0, f1=4000.0, amplitude=0.5, duration_s=0.5, sample_rate=16000) -> AudioClip:
    t = _t(duration_s, sample_rate)
    rate = (f1 - f0) / duration_s
    return AudioClip(amplitude * np.sin(2 * np.pi * (f0 * t + 0.5 * rate * t ** 2)), sample_rate)


def noise(sigma=0.1, duration_s=0.5, sample_rate=16000, seed=0) -> AudioClip:
    rng = np.random.default_rng(seed)
    return AudioClip.clipped(rng.normal(0.0, sigma, int(round(duration_s * sample_rate))), sample_rate)


def voiced(f0=150.0, n_harmonics=12, background_snr_db=30.0, peak=0.6,
           duration_s=0.5, sample_rate=16000, seed=0) -> AudioClip:
    """Harmonic tone with 1/h roll-off over a Gaussian noise floor."""
    rng = np.random.default_rng(seed)
    t = _t(duration_s, sample_rate)
    s = np.zeros_like(t)
    for h in range(1, n_harmonics + 1):
        if h * f0 >= sample_rate / 2:
            break
        s += np.sin(2 * np.pi * h * f0 * t + rng.uniform(0, 2 * np.pi)) / h
    s *= peak / np.max(np.abs(s))
    s += rng.normal(size=s.size) * np.sqrt(np.mean(s ** 2)) * 10 ** (-background_snr_db / 20)
    return AudioClip.clipped(s, sample_rate)
