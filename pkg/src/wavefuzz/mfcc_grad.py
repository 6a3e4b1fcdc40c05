"""Hand-written vector-Jacobian products through the MFCC pipeline, and the
poisoning objective  J(delta) = -||MF(x + delta) - MF(x)||_2 + alpha * ||delta||_2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .mfcc import MfccConfig, Trace, mfcc_samples

DISTANCE_GUARD = 1e-12
NORM_GUARD = 1e-12


@dataclass(frozen=True)
class ObjectiveValue:
    total: float
    feature_distance: float
    penalty: float


# --- per-stage VJPs ---------------------------------------------------------------

def pre_emphasis_vjp(g, coeff: float) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    out = g.copy()
    out[:-1] -= coeff * g[1:]
    return out


def frame_vjp(g_frames, index: np.ndarray, n_samples: int) -> np.ndarray:
    """Adjoint of x -> x[index]: overlap-add of frame cotangents."""
    return np.bincount(index.ravel(), weights=np.ravel(g_frames), minlength=n_samples)


def power_spectrum_vjp(g_power, spectrum, n_fft: int, frame_len: int) -> np.ndarray:
    """Adjoint of frames -> |rfft(frames, n_fft)|^2 / n_fft, given the forward rfft.

    d P_k / d x_m = (2/n) Re(conj(X_k) e^{-2 pi i k m / n}), so the pullback is
    (2/n) Re(sum_k g_k X_k e^{+2 pi i k m / n}) which irfft computes once the
    DC and Nyquist terms are doubled (irfft counts interior bins twice).
    """
    c = np.asarray(g_power) * spectrum
    c[..., 0] *= 2.0
    c[..., -1] *= 2.0
    return np.fft.irfft(c, n_fft, axis=-1)[..., :frame_len]


def log_floor_vjp(g_log, energies, log_floor: float) -> np.ndarray:
    live = energies > log_floor
    return np.where(live, g_log / np.where(live, energies, 1.0), 0.0)


def delta_vjp(g, window: int) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    T = g.shape[0]
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    t = np.arange(T)
    out = np.zeros_like(g)
    for n in range(1, window + 1):
        np.add.at(out, np.minimum(t + n, T - 1), n * g)
        np.add.at(out, np.maximum(t - n, 0), -n * g)
    return out / denom


# --- composition ------------------------------------------------------------------

def vjp_from_trace(trace: Trace, cotangent) -> np.ndarray:
    cfg = trace.cfg
    g = np.asarray(cotangent, dtype=np.float64)
    nc = cfg.n_ceps
    if g.shape != (trace.index.shape[0], 3 * nc):
        raise ValueError(
            f"cotangent shape {g.shape} does not match features {(trace.index.shape[0], 3 * nc)}"
        )
    g_d1 = g[:, nc:2 * nc] + delta_vjp(g[:, 2 * nc:], cfg.delta_window)
    g_static = g[:, :nc] + delta_vjp(g_d1, cfg.delta_window)
    g_log = g_static @ trace.dct
    g_energy = log_floor_vjp(g_log, trace.energies, cfg.log_floor)
    g_power = g_energy @ trace.filterbank
    g_frames = power_spectrum_vjp(g_power, trace.spectrum, cfg.n_fft, trace.index.shape[1])
    g_emph = frame_vjp(g_frames * trace.window, trace.index, trace.n_samples)
    return pre_emphasis_vjp(g_emph, cfg.pre_emphasis_coeff)


def mfcc_vjp(clip: AudioClip, cfg: MfccConfig, cotangent) -> np.ndarray:
    """cotangent^T . dMF/dsamples for the clip's samples."""
    return samples_vjp(clip.samples, clip.sample_rate, cfg, cotangent)


def samples_vjp(samples, sample_rate: int, cfg: MfccConfig, cotangent) -> np.ndarray:
    _, trace = mfcc_samples(samples, sample_rate, cfg, trace=True)
    return vjp_from_trace(trace, cotangent)


class Objective:
    """J(delta) for a fixed clean clip; caches MF(x) across evaluations."""

    def __init__(self, x: AudioClip, cfg: MfccConfig, alpha: float,
                 clean_features: np.ndarray | None = None):
        self.x = x
        self.cfg = cfg
        self.alpha = float(alpha)
        if clean_features is None:
            clean_features = mfcc_samples(x.samples, x.sample_rate, cfg)
        self.clean = clean_features

    def _check(self, delta) -> np.ndarray:
        d = np.asarray(delta, dtype=np.float64)
        if d.shape != self.x.samples.shape:
            raise ValueError(f"delta has shape {d.shape}, clip has {self.x.samples.shape}")
        return d

    def distance(self, delta) -> float:
        d = self._check(delta)
        feats = mfcc_samples(self.x.samples + d, self.x.sample_rate, self.cfg)
        return float(np.linalg.norm(feats - self.clean))

    def value(self, delta) -> ObjectiveValue:
        d = self._check(delta)
        dist = self.distance(d)
        penalty = self.alpha * float(np.linalg.norm(d))
        return ObjectiveValue(-dist + penalty, dist, penalty)

    def value_and_grad(self, delta):
        d = self._check(delta)
        feats, trace = mfcc_samples(self.x.samples + d, self.x.sample_rate, self.cfg, trace=True)
        diff = feats - self.clean
        dist = float(np.linalg.norm(diff))
        norm = float(np.linalg.norm(d))
        penalty = self.alpha * norm
        grad = np.zeros_like(d)
        if dist >= DISTANCE_GUARD:
            grad -= vjp_from_trace(trace, diff / dist)
        if norm >= NORM_GUARD:
            grad += self.alpha * d / norm
        return ObjectiveValue(-dist + penalty, dist, penalty), grad


def objective_and_grad(x: AudioClip, delta, cfg: MfccConfig, alpha: float):
    return Objective(x, cfg, alpha).value_and_grad(delta)
