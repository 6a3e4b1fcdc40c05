"""Run configuration: TOML file merged with command-line overrides.

Layout of the file (every key optional)::

    seed = 0
    jobs = 1

    [mfcc]        # MfccConfig fields
    [poison]      # PoisonConfig fields except seed
    [harness]     # HarnessOptions fields
    [output]      # spectrogram = "dir", check_trends = true
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .mfcc import MfccConfig
from .poisoner import PoisonConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Default epsilon for the synthetic harness: poisoned clips land near 11 dB SNR,
# inside the range the method reports for its own experiments.
DEFAULT_EPSILON = 120.0


class RunConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HarnessOptions:
    n_classes: int = 4
    clips_per_class: int = 150
    duration_s: float = 0.5
    sample_rate: int = 16000
    dataset_seed: int = 0
    spread: float = 0.15
    background_snr_db: float = 30.0
    lr: float = 0.5
    epochs: int = 300
    fine_tune_fraction: float = 0.25
    n_seeds: int = 5
    pr_grid: tuple = (0.5, 1.0, 5.0, 10.0)
    scenarios: tuple = ("from_scratch", "fine_tune")
    alphas: tuple = (0.1, 0.01, 0.001)
    sweep_pr: float = 5.0
    sweep_scenario: str = "fine_tune"
    quantile: float = 0.5
    attacker_seed: int = 1000
    attacker_clips_per_class: int = 30
    attacker_train_seed: int = 99
    calibration_stride: int = 6
    calibration_max_iters: int = 1000
    substitute: str = "logreg"  # "constant" ignores its input; used to test the failure path

    def __post_init__(self):
        if self.n_seeds < 1:
            raise RunConfigError("harness.n_seeds must be >= 1")
        if not self.pr_grid or not self.alphas:
            raise RunConfigError("harness.pr_grid and harness.alphas must be non-empty")
        if self.substitute not in ("logreg", "constant"):
            raise RunConfigError(f"unknown harness.substitute {self.substitute!r}")
        bad = set(self.scenarios) - {"from_scratch", "fine_tune"}
        if bad or not self.scenarios:
            raise RunConfigError(f"bad harness.scenarios {list(self.scenarios)}")


@dataclass(frozen=True)
class OutputOptions:
    spectrogram: Optional[str] = None
    check_trends: bool = False


@dataclass(frozen=True)
class RunConfig:
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    poison: PoisonConfig = field(default_factory=lambda: PoisonConfig(epsilon=DEFAULT_EPSILON))
    harness: HarnessOptions = field(default_factory=HarnessOptions)
    output: OutputOptions = field(default_factory=OutputOptions)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise RunConfigError("jobs must be >= 1")


# flag name -> (section, key)
FLAG_KEYS = {
    "seed": (None, "seed"),
    "jobs": (None, "jobs"),
    "epsilon": ("poison", "epsilon"),
    "alpha": ("poison", "alpha"),
    "lr": ("poison", "learning_rate"),
    "max_iters": ("poison", "max_iters"),
    "spectrogram": ("output", "spectrogram"),
    "check_trends": ("output", "check_trends"),
    "quantile": ("harness", "quantile"),
}


def _build(cls, table: dict, name: str, base=None):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise RunConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in table.items()}
    try:
        return replace(base, **vals) if base is not None else cls(**vals)
    except (TypeError, ValueError) as e:
        raise RunConfigError(f"[{name}]: {e}") from e


def from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    sections = {"mfcc": MfccConfig, "poison": PoisonConfig, "harness": HarnessOptions,
                "output": OutputOptions}
    parts = {}
    for name, cls in sections.items():
        table = doc.pop(name, {})
        if not isinstance(table, dict):
            raise RunConfigError(f"[{name}] must be a table")
        if name == "poison":
            if "seed" in table:
                raise RunConfigError("set the seed at top level, not in [poison]")
            parts[name] = _build(cls, table, name, PoisonConfig(epsilon=DEFAULT_EPSILON))
        else:
            parts[name] = _build(cls, table, name)
    unknown = set(doc) - {"seed", "jobs"}
    if unknown:
        raise RunConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    return RunConfig(**parts, seed=int(doc.get("seed", 0)), jobs=int(doc.get("jobs", 1)))


def load(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Read ``path`` (TOML) if given, then apply ``overrides`` keyed by flag name.
    ``None`` override values are ignored, so unset flags keep the file's value."""
    doc = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise RunConfigError(f"{path}: {e}") from e
    for flag, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = FLAG_KEYS[flag]
        if section is None:
            doc[key] = value
        else:
            doc.setdefault(section, {})[key] = value
    return from_dict(doc)
