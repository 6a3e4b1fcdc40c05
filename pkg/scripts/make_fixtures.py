"""Regenerate tests/fixtures/mfcc_reference.npz with the loop-based oracle.

    python scripts/make_fixtures.py

Slow (about a minute): the oracle uses an explicit O(N^2) DFT in pure Python.
"""

import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from tests import mfcc_oracle  # noqa: E402
from wavefuzz import signals  # noqa: E402

CLIPS = {
    "silence": signals.silence(),
    "impulse": signals.impulse(),
    "sine440": signals.sine(),
    "chirp": signals.chirp(),
    "noise": signals.noise(seed=1234),
}


def main():
    out = {}
    for name, clip in CLIPS.items():
        t0 = time.time()
        feats = np.array(mfcc_oracle.mfcc(clip.samples.tolist(), clip.sample_rate))
        out[f"{name}/samples"] = clip.samples
        out[f"{name}/features"] = feats
        print(f"{name}: {feats.shape} in {time.time() - t0:.1f}s")
    path = ROOT / "tests" / "fixtures" / "mfcc_reference.npz"
    np.savez_compressed(path, **out)
    print("wrote", path)


if __name__ == "__main__":
    main()
