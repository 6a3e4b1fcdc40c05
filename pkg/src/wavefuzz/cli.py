"""wavefuzz command line.

Machine-readable output (JSON, CSV) goes to stdout or files; the human summary
goes to stderr. Exit codes: 0 ok, 1 usage/other error, 2 some clip did not
reach epsilon, 3 I/O failure, 4 epsilon calibration failed.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .audio_io import WavFormatError, read_wav, write_wav
from .harness import (METHODS, CalibrationError, Classifier, Experiment, TrainHyper,
                      generate_dataset, substitute_calibration)
from .metrics import MetricReport, feature_distance, json_float, snr_db
from .mfcc import TooShortError, log_power_spectrogram, mfcc
from .poisoner import derive_seed, poison, random_noise_baseline

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_IO, EXIT_CALIBRATION = 0, 1, 2, 3, 4

FINE_TUNE_REFERENCE = "# reference (VggVox speaker recognition, fine-tune): PR | DAcc | SNR = 5 | 24.55 | 11.15"
ALPHA_REFERENCE = "# reference (VggVox, PR=5): DAcc at alpha 0.1 | 0.01 | 0.001 = 24.55 | 21.69 | 21.66"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is taken by non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# --- file helpers -------------------------------------------------------------------

def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode()


def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(c + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def matrix_csv(values) -> str:
    """One row per frame, 9 significant digits."""
    return "".join(",".join(f"{v:.9g}" for v in row) + "\n" for row in np.asarray(values))


def pgm_bytes(values) -> bytes:
    """8-bit binary PGM, linear grey scale, min-max normalised per image.
    Rows are frames, columns are frequency bins."""
    a = np.asarray(values, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    if hi > lo:
        g = np.floor((a - lo) / (hi - lo) * 255.0 + 0.5)
    else:
        g = np.zeros_like(a)
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode()
    return header + g.astype(np.uint8).tobytes()


def _wav_inputs(src: Path):
    if src.is_dir():
        files = sorted(p for p in src.rglob("*") if p.is_file() and p.suffix.lower() == ".wav")
        return [(p, p.relative_to(src).as_posix()) for p in files]
    if src.is_file():
        return [(src, src.name)]
    raise FileNotFoundError(f"no such file or directory: {src}")


def file_seed(seed: int, rel: str) -> int:
    """Per-file seed from the global seed and the file's relative path."""
    return derive_seed(seed, zlib.crc32(rel.encode()))


def _entry_float(v):
    return json_float(float(v))


# --- poison / baseline ----------------------------------------------------------------

def _process_file(job):
    kind, path, rel, out_path, cfg, target_snr = job
    try:
        clip = read_wav(path)
    except (OSError, WavFormatError) as e:
        return {"file": rel, "error": f"{type(e).__name__}: {e}"}
    seed = file_seed(cfg.seed, rel)
    try:
        if kind == "poison":
            res = poison(clip, replace(cfg.poison, seed=seed), cfg.mfcc)
        else:
            res = random_noise_baseline(clip, target_snr, seed, cfg.mfcc)
    except TooShortError as e:
        return {"file": rel, "error": f"TooShortError: {e}"}
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(out_path, res.poisoned)
    except OSError as e:
        return {"file": rel, "error": f"{type(e).__name__}: {e}"}
    entry = {"file": rel}
    entry.update({k: _entry_float(v) if isinstance(v, float) else v for k, v in res.report().items()})
    return entry


def _run_batch(kind, args, cfg) -> int:
    src, dst = Path(args.input), Path(args.output)
    try:
        inputs = _wav_inputs(src)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    if src.is_dir() and dst.resolve() == src.resolve():
        print("error: output directory must differ from the input directory", file=sys.stderr)
        return EXIT_IO
    jobs = [(kind, p, rel, dst / rel, cfg, getattr(args, "snr", None)) for p, rel in inputs]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            report = list(pool.map(_process_file, jobs))
    else:
        report = [_process_file(j) for j in jobs]
    _atomic_write(dst / "report.json", _json_bytes(report))
    sys.stdout.write(_json_bytes(report).decode())

    failed = [e for e in report if "error" in e]
    pending = [e for e in report if kind == "poison" and "error" not in e and not e["converged"]]
    for e in failed:
        print(f"{e['file']}: {e['error']}", file=sys.stderr)
    print(f"{kind}: {len(report)} file(s), {len(failed)} error(s), "
          f"{len(pending)} not converged", file=sys.stderr)
    if failed:
        return EXIT_IO
    if pending:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_poison(args, cfg) -> int:
    return _run_batch("poison", args, cfg)


def cmd_baseline(args, cfg) -> int:
    if not math.isfinite(args.snr):
        raise UsageError("--snr must be finite")
    return _run_batch("baseline", args, cfg)


# --- analyze --------------------------------------------------------------------------

def cmd_analyze(args, cfg) -> int:
    try:
        clean, other = read_wav(args.clean), read_wav(args.poisoned)
    except (OSError, WavFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    if len(clean) != len(other) or clean.sample_rate != other.sample_rate:
        raise UsageError(f"clips differ in length or rate ({len(clean)} @ {clean.sample_rate} vs "
                         f"{len(other)} @ {other.sample_rate}); metrics are undefined")
    fc, fo = mfcc(clean, cfg.mfcc), mfcc(other, cfg.mfcc)
    rep = MetricReport(snr_db=snr_db(clean.samples, other.samples),
                       feature_distance=feature_distance(fc, fo))
    sys.stdout.write(_json_bytes(rep.to_json_dict()).decode())
    if cfg.output.spectrogram:
        out = Path(cfg.output.spectrogram)
        try:
            for name, clip, feats in (("clean", clean, fc), ("poisoned", other, fo)):
                spec = log_power_spectrogram(clip, cfg.mfcc)
                _atomic_write(out / f"{name}_spectrogram.csv", matrix_csv(spec).encode())
                _atomic_write(out / f"{name}_spectrogram.pgm", pgm_bytes(spec))
                _atomic_write(out / f"{name}_mfcc.csv", matrix_csv(feats.values).encode())
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
    print(f"snr {rep.snr_db:.2f} dB, feature distance {rep.feature_distance:.4g}", file=sys.stderr)
    return EXIT_OK


# --- harness commands -----------------------------------------------------------------

def _dataset(h, seed=None, per_class=None):
    return generate_dataset(h.n_classes, per_class or h.clips_per_class, h.duration_s,
                            h.sample_rate, h.dataset_seed if seed is None else seed,
                            h.background_snr_db, h.spread)


def _hyper(h, seed=0):
    return TrainHyper(lr=h.lr, epochs=h.epochs, seed=seed, fine_tune_fraction=h.fine_tune_fraction)


def _seeds(cfg):
    return [cfg.seed + s for s in range(cfg.harness.n_seeds)]


def _emit_table(args, stem, header, rows, reports, comments):
    text = _csv_text(header, rows, comments)
    if args.output_dir:
        out = Path(args.output_dir)
        _atomic_write(out / f"{stem}.csv", text.encode())
        _atomic_write(out / f"{stem}.json", _json_bytes(reports))
    sys.stdout.write(text)


EVAL_COLUMNS = ["scenario", "method", "pr_percent", "n_poisoned", "acc_clean_percent",
                "acc_poisoned_percent", "dacc_percent", "mean_snr_db", "mean_feature_distance",
                "epsilon", "alpha"]


def cmd_eval(args, cfg) -> int:
    h = cfg.harness
    scenarios = [args.scenario] if args.scenario else list(h.scenarios)
    pcfg = replace(cfg.poison, seed=cfg.seed)
    exp = Experiment(_dataset(h), pcfg, cfg.mfcc, _hyper(h))
    seeds = _seeds(cfg)
    exp.prefetch(h.pr_grid, seeds, cfg.jobs)
    reports = []
    for scenario in scenarios:
        for pr in h.pr_grid:
            for method in METHODS:
                reports.append(exp.run(scenario, method, pr, seeds))
    rows = [[getattr(r, c) for c in EVAL_COLUMNS] for r in reports]
    _emit_table(args, "eval", EVAL_COLUMNS, rows, [r.to_json_dict() for r in reports],
                [FINE_TUNE_REFERENCE])
    for r in reports:
        print(f"{r.scenario:12s} {r.method:8s} PR={r.pr_percent:<5g} DAcc={r.dacc_percent:6.2f} "
              f"SNR={r.mean_snr_db:6.2f}", file=sys.stderr)
    if cfg.output.check_trends:
        return _check_trends(reports, scenarios)
    return EXIT_OK


def _check_trends(reports, scenarios) -> int:
    mean = {(r.scenario, r.method, r.pr_percent): r.dacc_percent for r in reports}
    status = EXIT_OK
    for scenario in scenarios:
        lo, hi = mean.get((scenario, "wavefuzz", 1.0)), mean.get((scenario, "wavefuzz", 10.0))
        if lo is None or hi is None:
            raise UsageError("--check-trends needs PR 1 and 10 in harness.pr_grid")
        ok = hi >= lo
        print(f"trend {scenario}: DAcc(10%)={hi:.2f} >= DAcc(1%)={lo:.2f}: "
              f"{'ok' if ok else 'VIOLATED'}", file=sys.stderr)
        if not ok:
            status = EXIT_ERROR
    return status


SWEEP_COLUMNS = ["alpha", "scenario", "pr_percent", "dacc_percent", "mean_snr_db",
                 "mean_feature_distance", "acc_clean_percent", "acc_poisoned_percent"]


def cmd_sweep_alpha(args, cfg) -> int:
    h = cfg.harness
    alphas = args.alphas or list(h.alphas)
    if any(a < 0 for a in alphas):
        raise UsageError("alphas must be non-negative")
    data = _dataset(h)
    seeds = _seeds(cfg)
    reports = []
    for a in alphas:
        exp = Experiment(data, replace(cfg.poison, alpha=a, seed=cfg.seed), cfg.mfcc, _hyper(h))
        exp.prefetch([h.sweep_pr], seeds, cfg.jobs)
        reports.append(exp.run(h.sweep_scenario, "wavefuzz", h.sweep_pr, seeds))
    rows = [[r.alpha, r.scenario, r.pr_percent, r.dacc_percent, r.mean_snr_db,
             r.mean_feature_distance, r.acc_clean_percent, r.acc_poisoned_percent] for r in reports]
    _emit_table(args, "sweep_alpha", SWEEP_COLUMNS, rows, [r.to_json_dict() for r in reports],
                [ALPHA_REFERENCE])
    for r in reports:
        print(f"alpha={r.alpha:<6g} DAcc={r.dacc_percent:6.2f} SNR={r.mean_snr_db:7.3f}", file=sys.stderr)
    return EXIT_OK


def constant_classifier(n_in: int, n_classes: int) -> Classifier:
    """Predicts class 0 whatever the input."""
    w = np.zeros((n_in + 1, n_classes))
    w[-1, 0] = 1.0
    return Classifier(w, np.zeros(n_in), np.ones(n_in))


def cmd_calibrate(args, cfg) -> int:
    h = cfg.harness
    data = _dataset(h, seed=h.attacker_seed, per_class=h.attacker_clips_per_class)
    sub = None
    if h.substitute == "constant":
        sub = constant_classifier(cfg.mfcc.feature_dim, h.n_classes)
    template = replace(cfg.poison, seed=cfg.seed)
    try:
        cal = substitute_calibration(data, template, cfg.mfcc, _hyper(h, h.attacker_train_seed),
                                     h.quantile, h.calibration_stride, substitute=sub)
    except CalibrationError as e:
        print(f"calibration failed: {e}", file=sys.stderr)
        return EXIT_CALIBRATION
    out = {"epsilon": cal.epsilon, "n_flipped": cal.n_flipped, "n_excluded": cal.n_excluded,
           "quantile": h.quantile}
    sys.stdout.write(_json_bytes(out).decode())
    print(f"epsilon={cal.epsilon:.4g} from {cal.n_flipped} flipped clip(s), "
          f"{cal.n_excluded} excluded", file=sys.stderr)
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------------

def _common(p):
    d = config_mod.RunConfig()
    p.add_argument("--config", help="TOML run configuration (flags override it)")
    p.add_argument("--seed", type=int, help=f"global seed (default {d.seed})")
    p.add_argument("--epsilon", type=float,
                   help=f"feature-distance threshold (default {d.poison.epsilon:g})")
    p.add_argument("--alpha", type=float, help=f"perturbation penalty weight (default {d.poison.alpha:g})")
    p.add_argument("--lr", type=float, help=f"Adam learning rate (default {d.poison.learning_rate:g})")
    p.add_argument("--max-iters", type=int, help=f"iteration cap (default {d.poison.max_iters})")
    p.add_argument("--jobs", type=int, help=f"worker processes (default {d.jobs})")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="wavefuzz", description="Clean-label audio poisoning toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("poison", help="poison a WAV file or directory")
    p.add_argument("input")
    p.add_argument("output", help="output directory (mirrors input names, plus report.json)")
    _common(p)

    p = sub.add_parser("baseline", help="add Gaussian noise at a target SNR")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--snr", type=float, default=20.0, help="target SNR in dB (default 20)")
    _common(p)

    p = sub.add_parser("analyze", help="metrics between a clean and a poisoned file")
    p.add_argument("clean")
    p.add_argument("poisoned")
    p.add_argument("--spectrogram", metavar="DIR",
                   help="write spectrogram CSV/PGM and MFCC CSV for both files into DIR")
    _common(p)

    p = sub.add_parser("eval", help="poison-rate grid on the synthetic dataset")
    p.add_argument("--scenario", choices=["from_scratch", "fine_tune"],
                   help="run one scenario (default: harness.scenarios)")
    p.add_argument("--output-dir", help="also write eval.csv and eval.json here")
    p.add_argument("--check-trends", action="store_const", const=True,
                   help="exit 1 if mean DAcc at PR 10%% is below PR 1%%")
    _common(p)

    p = sub.add_parser("sweep-alpha", help="DAcc and SNR across alpha values")
    p.add_argument("alphas", nargs="*", type=float, help="default: harness.alphas")
    p.add_argument("--output-dir", help="also write sweep_alpha.csv and sweep_alpha.json here")
    _common(p)

    p = sub.add_parser("calibrate", help="pick epsilon with a substitute model")
    p.add_argument("--quantile", type=float, help="quantile of flip distances (default 0.5)")
    _common(p)
    return ap


def load_run_config(args) -> config_mod.RunConfig:
    overrides = {k: getattr(args, k, None) for k in config_mod.FLAG_KEYS}
    return config_mod.load(args.config, overrides)


COMMANDS = {
    "poison": cmd_poison,
    "baseline": cmd_baseline,
    "analyze": cmd_analyze,
    "eval": cmd_eval,
    "sweep-alpha": cmd_sweep_alpha,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args)
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    except config_mod.RunConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
