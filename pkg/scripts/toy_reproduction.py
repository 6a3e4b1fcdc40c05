"""Poison-rate grid, alpha sweep and epsilon calibration on the synthetic set.

    python scripts/toy_reproduction.py [--out results] [--jobs 4] [--config configs/toy.toml]

Writes eval.csv/json, sweep_alpha.csv/json and calibration.json under --out.
Takes a few minutes on one core.
"""

import argparse
import contextlib
import io
import sys
from pathlib import Path

from wavefuzz import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--config", default=None)
    args = ap.parse_args()
    out = Path(args.out)
    common = ["--jobs", str(args.jobs)] + (["--config", args.config] if args.config else [])

    status = cli.main(["eval", "--output-dir", str(out), "--check-trends"] + common)
    status = cli.main(["sweep-alpha", "--output-dir", str(out)] + common) or status
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["calibrate"] + common)
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.json").write_text(buf.getvalue())
    print(buf.getvalue(), end="")
    return status or code


if __name__ == "__main__":
    sys.exit(main())
