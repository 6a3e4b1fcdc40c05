"""MFCC forward pipeline.

pre-emphasis -> framing -> Hamming window -> power spectrum -> mel filterbank
-> log -> orthonormal DCT-II -> [static | delta | delta-delta].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .audio_io import AudioClip


class ConfigError(ValueError):
    pass


class TooShortError(ValueError):
    pass


@dataclass(frozen=True)
class MfccConfig:
    pre_emphasis_coeff: float = 0.97
    frame_length_ms: float = 25.0
    hop_length_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 26
    n_ceps: int = 13
    delta_window: int = 2
    log_floor: float = 1e-10
    fmin_hz: float = 0.0
    fmax_hz: Optional[float] = None  # None means sample_rate / 2

    def __post_init__(self):
        if not 0.0 <= self.pre_emphasis_coeff < 1.0:
            raise ConfigError("pre_emphasis_coeff must be in [0, 1)")
        if self.frame_length_ms <= 0 or self.hop_length_ms <= 0:
            raise ConfigError("frame and hop lengths must be positive")
        if self.hop_length_ms > self.frame_length_ms:
            raise ConfigError("hop_length_ms must not exceed frame_length_ms")
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ConfigError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.n_mels < 1 or not 1 <= self.n_ceps <= self.n_mels:
            raise ConfigError("need 1 <= n_ceps <= n_mels")
        if self.delta_window < 1:
            raise ConfigError("delta_window must be >= 1")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")

    def frame_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_length_ms * sample_rate / 1000.0))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_length_ms * sample_rate / 1000.0))

    def fmax(self, sample_rate: int) -> float:
        return sample_rate / 2.0 if self.fmax_hz is None else float(self.fmax_hz)

    @property
    def feature_dim(self) -> int:
        return 3 * self.n_ceps

    def check(self, sample_rate: int) -> None:
        n = self.frame_samples(sample_rate)
        if n < 1 or self.hop_samples(sample_rate) < 1:
            raise ConfigError("frame/hop shorter than one sample at this rate")
        if self.n_fft < n:
            raise ConfigError(f"n_fft={self.n_fft} is smaller than the frame ({n} samples)")
        if not self.fmin_hz < self.fmax(sample_rate) <= sample_rate / 2.0:
            raise ConfigError("need fmin_hz < fmax_hz <= sample_rate/2")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """T x D MFCC matrix; D = 3 * n_ceps (static, delta, delta-delta)."""

    values: np.ndarray

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


def frame_count(n_samples: int, frame_len: int, hop: int) -> int:
    if n_samples < frame_len:
        return 0
    return 1 + (n_samples - frame_len) // hop


# --- stages -------------------------------------------------------------------

def pre_emphasis(samples, coeff: float) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    y = x.copy()
    y[1:] -= coeff * x[:-1]
    return y


def hamming(n: int) -> np.ndarray:
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def frame_indices(n_samples: int, frame_len: int, hop: int) -> np.ndarray:
    t = frame_count(n_samples, frame_len, hop)
    if t == 0:
        raise TooShortError(
            f"signal too short: {n_samples} samples, need at least one frame of {frame_len}"
        )
    return hop * np.arange(t)[:, None] + np.arange(frame_len)[None, :]


def frame_and_window(samples, cfg: MfccConfig, sample_rate: int) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    n = cfg.frame_samples(sample_rate)
    idx = frame_indices(x.size, n, cfg.hop_samples(sample_rate))
    return x[idx] * hamming(n)


def power_spectrum(frames, n_fft: int) -> np.ndarray:
    """|DFT|^2 / n_fft over bins 0..n_fft/2, frames zero-padded to n_fft."""
    spec = np.fft.rfft(np.asarray(frames, dtype=np.float64), n_fft, axis=-1)
    return (spec.real ** 2 + spec.imag ** 2) / n_fft


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def filterbank_edges(cfg: MfccConfig, sample_rate: int) -> np.ndarray:
    """FFT bin index of the n_mels + 2 mel-spaced edge/peak points."""
    mels = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax(sample_rate)), cfg.n_mels + 2)
    return np.floor((cfg.n_fft + 1) * mel_to_hz(mels) / sample_rate).astype(int)


def mel_filterbank(cfg: MfccConfig, sample_rate: int) -> np.ndarray:
    """Unnormalized triangular filters (peak 1) on the rfft bin grid."""
    cfg.check(sample_rate)
    return _mel_filterbank(cfg, sample_rate).copy()


@lru_cache(maxsize=32)
def _mel_filterbank(cfg: MfccConfig, sample_rate: int) -> np.ndarray:
    edges = filterbank_edges(cfg, sample_rate)
    n_bins = cfg.n_fft // 2 + 1
    k = np.arange(n_bins)
    fb = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        if not mid < hi:
            raise ConfigError(
                f"n_mels={cfg.n_mels} too large for n_fft={cfg.n_fft}: filter {m} collapses"
            )
        if mid > lo:
            rise = (k >= lo) & (k < mid)
            fb[m, rise] = (k[rise] - lo) / (mid - lo)
        fall = (k >= mid) & (k < hi)
        fb[m, fall] = (hi - k[fall]) / (hi - mid)
    fb.setflags(write=False)
    return fb


def log_mel(power_spec, filterbank, log_floor: float) -> np.ndarray:
    energies = np.asarray(power_spec) @ np.asarray(filterbank).T
    return np.log(np.maximum(energies, log_floor))


@lru_cache(maxsize=32)
def dct_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Rows of the orthonormal DCT-II basis; cepstra = logmel @ dct_matrix.T."""
    j = np.arange(n_out)[:, None]
    m = np.arange(n_in)[None, :]
    basis = np.cos(np.pi * j * (m + 0.5) / n_in) * np.sqrt(2.0 / n_in)
    basis[0] *= np.sqrt(0.5)
    basis.setflags(write=False)
    return basis


def dct_cepstra(log_mel_vec, n_ceps: int) -> np.ndarray:
    L = np.asarray(log_mel_vec, dtype=np.float64)
    return L @ dct_matrix(L.shape[-1], n_ceps).T


def delta(features, window: int) -> np.ndarray:
    """Regression deltas over time (axis 0) with replicate padding."""
    c = np.asarray(features, dtype=np.float64)
    T = c.shape[0]
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    t = np.arange(T)
    out = np.zeros_like(c)
    for n in range(1, window + 1):
        out += n * (c[np.minimum(t + n, T - 1)] - c[np.maximum(t - n, 0)])
    return out / denom


# --- composition ----------------------------------------------------------------

@dataclass
class Trace:
    """Intermediates of one forward pass, kept for the reverse pass."""

    n_samples: int
    sample_rate: int
    index: np.ndarray
    window: np.ndarray
    spectrum: np.ndarray  # complex rfft of the windowed frames
    energies: np.ndarray  # filterbank energies before the floor
    filterbank: np.ndarray
    dct: np.ndarray
    cfg: MfccConfig = field(repr=False)


def mfcc_samples(samples, sample_rate: int, cfg: MfccConfig, trace: bool = False):
    """MFCC of a raw sample array. Returns values, or (values, Trace) when ``trace``."""
    cfg.check(sample_rate)
    x = np.asarray(samples, dtype=np.float64)
    n = cfg.frame_samples(sample_rate)
    idx = frame_indices(x.size, n, cfg.hop_samples(sample_rate))
    win = hamming(n)
    frames = pre_emphasis(x, cfg.pre_emphasis_coeff)[idx] * win
    spec = np.fft.rfft(frames, cfg.n_fft, axis=-1)
    power = (spec.real ** 2 + spec.imag ** 2) / cfg.n_fft
    fb = _mel_filterbank(cfg, sample_rate)
    energies = power @ fb.T
    dct = dct_matrix(cfg.n_mels, cfg.n_ceps)
    static = np.log(np.maximum(energies, cfg.log_floor)) @ dct.T
    d1 = delta(static, cfg.delta_window)
    d2 = delta(d1, cfg.delta_window)
    values = np.hstack([static, d1, d2])
    if not trace:
        return values
    return values, Trace(x.size, sample_rate, idx, win, spec, energies, fb, dct, cfg)


def mfcc(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    return FeatureMatrix(mfcc_samples(clip.samples, clip.sample_rate, cfg))


def log_power_spectrogram(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """ln(max(P, log_floor)) of the Hamming-windowed frames (no pre-emphasis), T x (n_fft/2+1)."""
    cfg.check(clip.sample_rate)
    frames = frame_and_window(clip.samples, cfg, clip.sample_rate)
    return np.log(np.maximum(power_spectrum(frames, cfg.n_fft), cfg.log_floor))
