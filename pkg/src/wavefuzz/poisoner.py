"""Adam-driven MFCC feature-distance maximisation and the Gaussian-noise baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .audio_io import AudioClip
from .metrics import UndefinedSNRError, snr_db
from .mfcc import MfccConfig, mfcc_samples
from .mfcc_grad import Objective, ObjectiveValue


class NonFiniteObjectiveError(FloatingPointError):
    pass


def derive_seed(*keys: int) -> int:
    """Stable 64-bit seed from a tuple of non-negative integers (e.g. global seed, clip index)."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class PoisonConfig:
    epsilon: float = 1.0
    alpha: float = 0.1
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_iters: int = 2000
    init_sigma_rel: float = 1e-3
    seed: int = 0
    input_l2_budget: Optional[float] = None

    def __post_init__(self):
        if self.epsilon < 0 or self.alpha < 0:
            raise ValueError("epsilon and alpha must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init_sigma_rel < 0:
            raise ValueError("init_sigma_rel must be non-negative")


@dataclass
class PoisonResult:
    poisoned: AudioClip
    delta: np.ndarray
    iterations_used: int
    converged: bool
    feature_distance: float
    snr_db: float
    input_l2: float
    within_budget: Optional[bool] = None
    objective_trace: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "feature_distance": self.feature_distance,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "input_l2": self.input_l2,
        }


class Adam:
    def __init__(self, shape, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def rms(samples) -> float:
    s = np.asarray(samples, dtype=np.float64)
    return float(np.sqrt(np.mean(s * s)))


def _safe_snr(clean, perturbed) -> float:
    try:
        return snr_db(clean, perturbed)
    except UndefinedSNRError:
        return math.nan


def _clamp_delta(x: np.ndarray, delta: np.ndarray) -> np.ndarray:
    return np.clip(x + delta, -1.0, 1.0) - x


def _result(x: AudioClip, delta, iters, converged, dist, budget, trace) -> PoisonResult:
    poisoned = AudioClip.clipped(x.samples + delta, x.sample_rate)
    l2 = float(np.linalg.norm(delta))
    return PoisonResult(
        poisoned=poisoned,
        delta=delta,
        iterations_used=int(iters),
        converged=bool(converged),
        feature_distance=float(dist),
        snr_db=_safe_snr(x.samples, poisoned.samples),
        input_l2=l2,
        within_budget=None if budget is None else l2 <= budget,
        objective_trace=trace,
    )


# callback(iteration, delta, value) -> truthy to stop early
Callback = Callable[[int, np.ndarray, ObjectiveValue], bool]


def poison(x: AudioClip, pcfg: PoisonConfig, mcfg: MfccConfig = MfccConfig(),
           callback: Optional[Callback] = None, keep_trace: bool = False) -> PoisonResult:
    """Adam steps on delta until ||MF(x + delta) - MF(x)|| >= epsilon or max_iters.

    The distance is tested at the top of each iteration, so ``epsilon=0``
    returns the (clamped) initial perturbation without any update.
    """
    xs = x.samples
    objective = Objective(x, mcfg, pcfg.alpha)
    rng = np.random.default_rng(pcfg.seed)
    sigma = pcfg.init_sigma_rel * rms(xs)
    delta = _clamp_delta(xs, rng.normal(0.0, 1.0, xs.size) * sigma)
    adam = Adam(xs.shape, pcfg.learning_rate, pcfg.adam_beta1, pcfg.adam_beta2, pcfg.adam_eps)
    trace = []
    i = 0
    while True:
        value, grad = objective.value_and_grad(delta)
        if not (math.isfinite(value.total) and np.all(np.isfinite(grad))):
            raise NonFiniteObjectiveError(f"non-finite objective or gradient at iteration {i}")
        if keep_trace:
            trace.append(value)
        converged = bool(value.feature_distance >= pcfg.epsilon)
        if callback is not None and callback(i, delta, value):
            break
        if converged or i >= pcfg.max_iters:
            break
        if adam.t == 0 and not np.any(grad):
            # zero gradient with empty moments: Adam would never move
            break
        delta = _clamp_delta(xs, adam.step(delta, grad))
        i += 1
    return _result(x, delta, i, converged, value.feature_distance, pcfg.input_l2_budget, trace)


def random_noise_baseline(x: AudioClip, target_snr_db: float, seed: int,
                          mcfg: MfccConfig = MfccConfig()) -> PoisonResult:
    """i.i.d. Gaussian perturbation with sigma = RMS(x) * 10^(-target/20)."""
    if not math.isfinite(target_snr_db):
        raise ValueError("target_snr_db must be finite")
    xs = x.samples
    sigma = rms(xs) * 10.0 ** (-target_snr_db / 20.0)
    rng = np.random.default_rng(seed)
    delta = _clamp_delta(xs, rng.normal(0.0, 1.0, xs.size) * sigma)
    clean = mfcc_samples(xs, x.sample_rate, mcfg)
    dist = float(np.linalg.norm(mfcc_samples(xs + delta, x.sample_rate, mcfg) - clean))
    return _result(x, delta, 0, False, dist, None, [])
