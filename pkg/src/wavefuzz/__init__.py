"""Clean-label audio poisoning by MFCC feature-distance maximisation."""

from .audio_io import AudioClip, WavFormatError, read_wav, write_wav
from .metrics import MetricReport, dacc, feature_distance, pr_percent, snr_db
from .mfcc import ConfigError, FeatureMatrix, MfccConfig, TooShortError, mfcc
from .mfcc_grad import Objective, ObjectiveValue, mfcc_vjp, objective_and_grad
from .poisoner import (NonFiniteObjectiveError, PoisonConfig, PoisonResult, poison,
                       random_noise_baseline)

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "WavFormatError", "read_wav", "write_wav",
    "MetricReport", "dacc", "feature_distance", "pr_percent", "snr_db",
    "ConfigError", "FeatureMatrix", "MfccConfig", "TooShortError", "mfcc",
    "Objective", "ObjectiveValue", "mfcc_vjp", "objective_and_grad",
    "NonFiniteObjectiveError", "PoisonConfig", "PoisonResult", "poison",
    "random_noise_baseline",
]
