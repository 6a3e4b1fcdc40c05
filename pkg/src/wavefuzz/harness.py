"""Desk-scale poisoning experiments on a synthetic labelled audio set.

A multinomial logistic-regression classifier on time-averaged MFCCs stands in
for the victim model; WaveFuzz and SNR-matched Gaussian noise are compared under
from-scratch training and fine-tuning.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .audio_io import AudioClip
from .metrics import dacc
from .mfcc import MfccConfig, mfcc_samples
from .poisoner import PoisonConfig, PoisonResult, derive_seed, poison, random_noise_baseline

SCENARIOS = ("from_scratch", "fine_tune")
CHIRP_BASE_RATE = 2500.0  # Hz per second between neighbouring classes
CHIRP_LEVEL = 2.0
METHODS = ("wavefuzz", "noise")


class CalibrationError(RuntimeError):
    pass


class TrainingDivergedError(FloatingPointError):
    pass


# --- data ---------------------------------------------------------------------------

@dataclass(eq=False)
class LabeledDataset:
    clips: list
    labels: np.ndarray
    is_train: np.ndarray
    n_classes: int
    seed: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.is_train = np.asarray(self.is_train, dtype=bool)
        if not len(self.clips) == self.labels.size == self.is_train.size:
            raise ValueError("clips, labels and split tags must have equal length")

    @property
    def train_idx(self) -> np.ndarray:
        return np.flatnonzero(self.is_train)

    @property
    def test_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.is_train)


def class_signal(k: int, t: np.ndarray, rng: np.random.Generator,
                 spread: float = 0.15, n_classes: int = 4) -> np.ndarray:
    """One clip of class ``k``.

    A harmonic chord on a random pitch shaped by a random resonance (both drawn
    from class-independent ranges), plus a chirp through the resonance whose
    sweep rate identifies the class. ``spread`` is the log-normal jitter of the
    sweep rate; larger values make neighbouring classes overlap.
    """
    f0 = rng.uniform(110.0, 260.0)
    centre = 1000.0 * math.exp(rng.uniform(-0.4, 0.4))
    width = 0.35 * centre
    sig = np.zeros_like(t)
    for h in range(1, int(4000.0 // f0) + 1):
        amp = math.exp(-0.5 * ((h * f0 - centre) / width) ** 2) + 0.03
        sig += amp * np.sin(2 * np.pi * h * f0 * t + rng.uniform(0, 2 * np.pi))
    rate = CHIRP_BASE_RATE * (k - (n_classes - 1) / 2.0) * math.exp(rng.normal(0.0, spread))
    f_start = centre - 0.5 * rate * t[-1]
    phase = 2 * np.pi * (f_start * t + 0.5 * rate * t ** 2)
    sig += CHIRP_LEVEL * np.sin(phase + rng.uniform(0, 2 * np.pi))
    return sig


def generate_dataset(n_classes: int = 4, clips_per_class: int = 50, duration_s: float = 0.5,
                     sample_rate: int = 16000, seed: int = 0,
                     background_snr_db: float = 30.0, spread: float = 0.15) -> LabeledDataset:
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if clips_per_class < 2:
        raise ValueError("need at least two clips per class for a train/test split")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    clips, labels, is_train = [], [], []
    n_test = max(1, int(round(0.2 * clips_per_class)))
    for k in range(n_classes):
        test_slots = set(rng.permutation(clips_per_class)[:n_test].tolist())
        for j in range(clips_per_class):
            sig = class_signal(k, t, rng, spread, n_classes)
            sig *= rng.uniform(0.3, 0.9) / np.max(np.abs(sig))
            noise = rng.normal(size=n) * math.sqrt(np.mean(sig ** 2)) * 10 ** (-background_snr_db / 20)
            sig = sig + noise
            peak = np.max(np.abs(sig))
            if peak > 0.9:
                sig *= 0.9 / peak
            clips.append(AudioClip(sig, sample_rate))
            labels.append(k)
            is_train.append(j not in test_slots)
    return LabeledDataset(clips, labels, is_train, n_classes, seed)


# --- classifier --------------------------------------------------------------------

@dataclass(frozen=True)
class TrainHyper:
    lr: float = 0.5
    epochs: int = 300
    seed: int = 0
    init_scale: float = 0.01
    fine_tune_fraction: float = 0.25


@dataclass
class Classifier:
    weights: np.ndarray  # (D_in + 1) x K, last row is the bias
    mean: np.ndarray
    scale: np.ndarray
    hyper: TrainHyper = field(default_factory=TrainHyper)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def logits(self, feats) -> np.ndarray:
        z = (np.atleast_2d(feats) - self.mean) / self.scale
        return np.hstack([z, np.ones((z.shape[0], 1))]) @ self.weights

    def predict(self, feats) -> np.ndarray:
        return np.argmax(self.logits(feats), axis=1)

    def predict_clip(self, clip: AudioClip, mcfg: MfccConfig) -> int:
        return int(self.predict(clip_features(clip, mcfg))[0])

    def accuracy(self, feats, labels) -> float:
        return 100.0 * float(np.mean(self.predict(feats) == np.asarray(labels)))


def clip_features(clip: AudioClip, mcfg: MfccConfig) -> np.ndarray:
    return mfcc_samples(clip.samples, clip.sample_rate, mcfg).mean(axis=0)


def dataset_features(clips: Sequence[AudioClip], mcfg: MfccConfig) -> np.ndarray:
    return np.vstack([clip_features(c, mcfg) for c in clips])


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gradient_descent(clf: Classifier, feats, labels, epochs: int, lr: float,
                     n_norm: Optional[int] = None) -> Classifier:
    """Full-batch gradient descent on summed cross-entropy divided by ``n_norm``
    (default: the batch size, i.e. the mean). Returns a new Classifier."""
    z = (np.asarray(feats) - clf.mean) / clf.scale
    X = np.hstack([z, np.ones((z.shape[0], 1))])
    Y = np.eye(clf.n_classes)[np.asarray(labels)]
    W = clf.weights.copy()
    n_norm = X.shape[0] if n_norm is None else n_norm
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is checked below
        for epoch in range(epochs):
            P = _softmax(X @ W)
            W -= lr * X.T @ (P - Y) / n_norm
            if not np.all(np.isfinite(W)):
                raise TrainingDivergedError(f"weights became non-finite at epoch {epoch}")
    return replace(clf, weights=W)


def fit_features(feats, labels, n_classes: int, hyper: TrainHyper) -> Classifier:
    feats = np.asarray(feats, dtype=np.float64)
    mean = feats.mean(axis=0)
    scale = feats.std(axis=0)
    scale[scale < 1e-12] = 1.0
    rng = np.random.default_rng(hyper.seed)
    W0 = rng.normal(0.0, hyper.init_scale, (feats.shape[1] + 1, n_classes)) if hyper.epochs else \
        np.zeros((feats.shape[1] + 1, n_classes))
    clf = Classifier(W0, mean, scale, hyper)
    return gradient_descent(clf, feats, labels, hyper.epochs, hyper.lr)


def train_classifier(data: LabeledDataset, mcfg: MfccConfig = MfccConfig(),
                     hyper: TrainHyper = TrainHyper()) -> Classifier:
    idx = data.train_idx
    feats = dataset_features([data.clips[i] for i in idx], mcfg)
    return fit_features(feats, data.labels[idx], data.n_classes, hyper)


# --- experiments ------------------------------------------------------------------

@dataclass
class ExperimentReport:
    scenario: str
    method: str
    pr_percent: float
    n_poisoned: int
    acc_clean_percent: float
    acc_poisoned_percent: float
    dacc_percent: float
    mean_snr_db: float
    mean_feature_distance: float
    epsilon: float
    alpha: float
    seeds: list
    per_seed_dacc: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return asdict(self)


def n_poison_clips(pr: float, n_train: int) -> int:
    return int(math.floor(pr / 100.0 * n_train + 0.5))


def _poison_job(args):
    clip, cfg, mcfg = args
    return poison(clip, cfg, mcfg)


class PoisonCache:
    """Per-clip poisoned versions, computed lazily and keyed by clip index.

    Each clip's poison seed is derived from (pcfg.seed, clip index), so a clip's
    poisoned waveform does not depend on which experiment requested it first.
    """

    def __init__(self, data: LabeledDataset, pcfg: PoisonConfig, mcfg: MfccConfig):
        self.data, self.pcfg, self.mcfg = data, pcfg, mcfg
        self._wavefuzz: dict[int, PoisonResult] = {}
        self._noise: dict[int, PoisonResult] = {}

    def _cfg(self, i: int) -> PoisonConfig:
        return replace(self.pcfg, seed=derive_seed(self.pcfg.seed, i))

    def wavefuzz(self, i: int) -> PoisonResult:
        if i not in self._wavefuzz:
            self._wavefuzz[i] = poison(self.data.clips[i], self._cfg(i), self.mcfg)
        return self._wavefuzz[i]

    def fill(self, indices, jobs: int = 1) -> None:
        """Poison the given clips up front, in up to ``jobs`` worker processes."""
        todo = sorted({int(i) for i in indices} - set(self._wavefuzz))
        if jobs <= 1 or len(todo) < 2:
            for i in todo:
                self.wavefuzz(i)
            return
        work = [(self.data.clips[i], self._cfg(i), self.mcfg) for i in todo]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, res in zip(todo, pool.map(_poison_job, work, chunksize=4)):
                self._wavefuzz[i] = res

    def noise(self, i: int) -> PoisonResult:
        """Gaussian noise at the SNR WaveFuzz reached on the same clip."""
        if i not in self._noise:
            target = self.wavefuzz(i).snr_db
            seed = derive_seed(self.pcfg.seed, i, 1)
            self._noise[i] = random_noise_baseline(self.data.clips[i], target, seed, self.mcfg)
        return self._noise[i]

    def get(self, method: str, i: int) -> PoisonResult:
        if method == "wavefuzz":
            return self.wavefuzz(i)
        if method == "noise":
            return self.noise(i)
        raise ValueError(f"unknown method {method!r}")


class Experiment:
    """Shared state (features, clean control models, poison cache) for one dataset."""

    def __init__(self, data: LabeledDataset, pcfg: PoisonConfig, mcfg: MfccConfig = MfccConfig(),
                 hyper: TrainHyper = TrainHyper()):
        self.data, self.pcfg, self.mcfg, self.hyper = data, pcfg, mcfg, hyper
        self.cache = PoisonCache(data, pcfg, mcfg)
        self.features = dataset_features(data.clips, mcfg)
        self._clean: dict[int, Classifier] = {}

    def clean_model(self, seed: int) -> Classifier:
        if seed not in self._clean:
            tr = self.data.train_idx
            self._clean[seed] = fit_features(self.features[tr], self.data.labels[tr],
                                             self.data.n_classes, replace(self.hyper, seed=seed))
        return self._clean[seed]

    def test_accuracy(self, clf: Classifier) -> float:
        te = self.data.test_idx
        return clf.accuracy(self.features[te], self.data.labels[te])

    def select(self, pr: float, seed: int) -> np.ndarray:
        if not 0 < pr <= 100:
            raise ValueError("pr_percent must lie in (0, 100]")
        tr = self.data.train_idx
        m = n_poison_clips(pr, tr.size)
        if m == 0:
            raise ValueError(
                f"PR={pr}% of {tr.size} training clips rounds to zero poisoned clips; "
                "use a larger dataset or PR"
            )
        rng = np.random.default_rng(derive_seed(seed, 7919))
        return np.sort(rng.choice(tr, size=m, replace=False))

    def prefetch(self, prs: Sequence[float], seeds: Sequence[int], jobs: int = 1) -> None:
        chosen = [self.select(pr, s) for pr in prs for s in seeds]
        self.cache.fill(np.concatenate(chosen) if chosen else [], jobs)

    def run_seed(self, scenario: str, method: str, pr: float, seed: int) -> dict:
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}")
        chosen = self.select(pr, seed)
        results = [self.cache.get(method, int(i)) for i in chosen]
        poisoned_feats = dataset_features([r.poisoned for r in results], self.mcfg)
        clean = self.clean_model(seed)
        acc_clean = self.test_accuracy(clean)
        tr = self.data.train_idx
        if scenario == "from_scratch":
            feats = self.features.copy()
            feats[chosen] = poisoned_feats
            victim = fit_features(feats[tr], self.data.labels[tr], self.data.n_classes,
                                  replace(self.hyper, seed=seed))
        else:
            epochs = max(1, int(round(self.hyper.fine_tune_fraction * self.hyper.epochs)))
            victim = gradient_descent(clean, poisoned_feats, self.data.labels[chosen],
                                      epochs, self.hyper.lr)
        acc_poisoned = self.test_accuracy(victim)
        return {
            "acc_clean": acc_clean,
            "acc_poisoned": acc_poisoned,
            "snr": [r.snr_db for r in results],
            "dist": [r.feature_distance for r in results],
            "n": chosen.size,
        }

    def run(self, scenario: str, method: str, pr: float, seeds: Sequence[int]) -> ExperimentReport:
        runs = [self.run_seed(scenario, method, pr, s) for s in seeds]
        acc_c = float(np.mean([r["acc_clean"] for r in runs]))
        acc_p = float(np.mean([r["acc_poisoned"] for r in runs]))
        per_seed = [dacc(r["acc_clean"], r["acc_poisoned"]) for r in runs]
        snrs = np.sort(np.concatenate([r["snr"] for r in runs]))
        dists = np.sort(np.concatenate([r["dist"] for r in runs]))
        return ExperimentReport(
            scenario=scenario, method=method, pr_percent=pr, n_poisoned=runs[0]["n"],
            acc_clean_percent=acc_c, acc_poisoned_percent=acc_p, dacc_percent=acc_c - acc_p,
            mean_snr_db=float(np.mean(snrs)), mean_feature_distance=float(np.mean(dists)),
            epsilon=self.pcfg.epsilon, alpha=self.pcfg.alpha, seeds=list(seeds),
            per_seed_dacc=per_seed,
        )


def run_poison_experiment(scenario: str, data: LabeledDataset, pr_percent: float,
                          pcfg: PoisonConfig, mcfg: MfccConfig = MfccConfig(),
                          hyper: TrainHyper = TrainHyper(), n_seeds: int = 5,
                          method: str = "wavefuzz") -> ExperimentReport:
    return Experiment(data, pcfg, mcfg, hyper).run(scenario, method, pr_percent, range(n_seeds))


# --- epsilon calibration ---------------------------------------------------------

@dataclass
class Calibration:
    epsilon: float
    flip_distances: list
    n_flipped: int
    n_excluded: int


def calibrate_epsilon(substitute: Classifier, clips: Sequence[AudioClip],
                      pcfg_template: PoisonConfig, mcfg: MfccConfig = MfccConfig(),
                      quantile: float = 0.5) -> Calibration:
    """Quantile of the feature distance at which the substitute's label first flips."""
    if len(clips) < 5:
        raise ValueError("calibration needs at least 5 clips")
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    flips = []
    for i, clip in enumerate(clips):
        original = substitute.predict_clip(clip, mcfg)
        hit = []

        def watch(_, delta, value, clip=clip, original=original, hit=hit):
            current = clip.samples + delta
            feats = mfcc_samples(current, clip.sample_rate, mcfg).mean(axis=0)
            if int(substitute.predict(feats)[0]) != original:
                hit.append(value.feature_distance)
                return True
            return False

        cfg = replace(pcfg_template, epsilon=math.inf, seed=derive_seed(pcfg_template.seed, i))
        poison(clip, cfg, mcfg, callback=watch)
        if hit:
            flips.append(hit[0])
    if not flips:
        raise CalibrationError(
            f"substitute never changed its prediction on {len(clips)} clips within "
            f"{pcfg_template.max_iters} iterations"
        )
    eps = float(np.quantile(np.sort(flips), quantile))
    return Calibration(eps, flips, len(flips), len(clips) - len(flips))


def substitute_calibration(data: LabeledDataset, pcfg_template: PoisonConfig,
                           mcfg: MfccConfig = MfccConfig(), hyper: TrainHyper = TrainHyper(),
                           quantile: float = 0.5, stride: int = 6,
                           substitute: Optional[Classifier] = None) -> Calibration:
    """Train a substitute on the attacker's own data and calibrate on every
    ``stride``-th of its training clips."""
    if substitute is None:
        substitute = train_classifier(data, mcfg, hyper)
    clips = [data.clips[i] for i in data.train_idx[::stride]]
    return calibrate_epsilon(substitute, clips, pcfg_template, mcfg, quantile)
