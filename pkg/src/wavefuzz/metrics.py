"""SNR, accuracy decline (DAcc), poison rate (PR) and MFCC feature distance."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class UndefinedSNRError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    snr_db: float
    feature_distance: float
    dacc_percent: float = 0.0
    pr_percent: float = 0.0

    def to_json_dict(self) -> dict:
        return {k: json_float(v) for k, v in asdict(self).items()}


def json_float(v: float):
    """JSON has no infinity; +/-inf and nan are emitted as strings."""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def snr_db(clean, perturbed) -> float:
    """10 log10(signal power / perturbation power); +inf when nothing changed."""
    x = np.asarray(clean, dtype=np.float64)
    y = np.asarray(perturbed, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    signal = float(np.sum(x * x))
    if signal == 0.0:
        raise UndefinedSNRError("SNR is undefined for an all-zero clean signal")
    noise = float(np.sum((y - x) ** 2))
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


def dacc(acc_clean_percent: float, acc_poisoned_percent: float) -> float:
    for a in (acc_clean_percent, acc_poisoned_percent):
        if not 0.0 <= a <= 100.0:
            raise ValueError(f"accuracy {a} outside [0, 100]")
    return acc_clean_percent - acc_poisoned_percent


def pr_percent(m_poisoned: int, total: int) -> float:
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= m_poisoned <= total:
        raise ValueError(f"need 0 <= m <= total, got m={m_poisoned}, total={total}")
    return 100.0 * m_poisoned / total


def feature_distance(a, b) -> float:
    a = getattr(a, "values", a)
    b = getattr(b, "values", b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"feature shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm((a - b).ravel()))
