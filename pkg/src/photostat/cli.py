"""Command-line entry point: ``photostat {simulate,fit,frames,reproduce}``.

Exit codes: 0 success, 1 usage error, 2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dist import DistributionError, PhotonSource
from .emission import EmissionConfig, coupling_for_mean, simulate_histogram
from .frames import (
    FrameError,
    SpotModel,
    analyze_frame_stream,
    frame_path,
    generate_frame,
    list_frames,
    write_pgm,
)
from .histogram import CountHistogram
from .inference import FitError, estimate_mode_count, fano_factor, fit_power_law
from .records import config_digest, dumps, profile_csv
from .reproduce import FIGURES, reproduce

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("PHOTOSTAT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"PHOTOSTAT_SEED must be an integer, got {env!r}") from None
    return 0


class _Run:
    """Collects written files and emits the manifest last."""

    def __init__(self, out: Path, argv, seed, config):
        self.out = out
        self.argv = list(argv)
        self.seed = seed
        self.config = config
        self.files: list[str] = []
        self.start = time.time()
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.files.append(name)
        return path

    def track(self, path: Path):
        self.files.append(str(path.relative_to(self.out)))

    def finish(self):
        manifest = {
            "command_line": ["photostat", *self.argv],
            "seed": self.seed,
            "config": self.config,
            "config_digest": config_digest(self.config),
            "tool_version": __version__,
            "started_utc": datetime.fromtimestamp(self.start, timezone.utc).isoformat(),
            "wall_clock_s": round(time.time() - self.start, 3),
            "outputs": sorted(self.files + ["manifest.json"]),
        }
        (self.out / "manifest.json").write_text(dumps(manifest))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args, argv) -> int:
    if args.pulses < 1:
        raise UsageError("--pulses must be >= 1")
    if args.mean is not None and args.coupling is not None:
        raise UsageError("give either --mean or --coupling, not both")
    if args.mean is None and args.coupling is None:
        raise UsageError("one of --mean or --coupling is required")
    if args.source == "coherent" and args.modes != 1:
        raise UsageError("--modes only applies to --source bsv")
    if args.nonlinearity < 1:
        raise UsageError("--nonlinearity must be >= 1")
    if args.source == "bsv" and args.nonlinearity != int(args.nonlinearity):
        raise UsageError("BSV sources need an integer --nonlinearity")
    if not 0 < args.efficiency <= 1:
        raise UsageError("--efficiency must lie in (0, 1]")
    if args.background < 0:
        raise UsageError("--background must be non-negative")
    ref = args.reference_energy if args.reference_energy is not None else args.energy
    if args.mean is not None:
        coupling = coupling_for_mean(args.mean, args.energy, ref, args.nonlinearity,
                                     args.efficiency, args.background)
    else:
        coupling = args.coupling
    source = (PhotonSource.coherent() if args.source == "coherent"
              else PhotonSource.bsv(args.modes))
    cfg = EmissionConfig(n=args.nonlinearity, coupling=coupling, efficiency=args.efficiency,
                         background_mean=args.background)
    seed = _seed(args)
    config = {
        "source": args.source, "modes": source.mode_count, "nonlinearity": args.nonlinearity,
        "coupling": coupling, "efficiency": args.efficiency, "background": args.background,
        "energy": args.energy, "reference_energy": ref, "pulses": args.pulses,
        # efficiency and coupling are not separately identifiable from counts
        "efficiency_coupling_split": "modeling choice",
    }
    run = _Run(Path(args.out), argv, seed, config)
    hist = simulate_histogram(source, args.energy, cfg, args.pulses, seed, ref,
                              workers=args.workers)
    run.write("histogram.csv", hist.to_csv())
    run.write("summary.json", dumps({
        "mean": hist.mean(),
        "fano": fano_factor(hist) if hist.mean() > 0 else None,
        "max_count": hist.k_max,
        "pulses": hist.total_pulses,
        "expected_mean": cfg.detected_mean(args.energy, ref),
    }))
    run.finish()
    print(f"mean={hist.mean():.6g} max={hist.k_max} pulses={hist.total_pulses} -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _read_points(path: Path):
    pts = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")]
        if lineno == 1 and parts[0].lower() in ("energy", "e", "e_p"):
            continue
        try:
            if len(parts) != 2:
                raise ValueError
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise UsageError(f"{path}: line {lineno}: expected 'energy,mean', got {line!r}") from None
    return pts


def cmd_fit(args, argv) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file {path} not found")
    seed = _seed(args)
    if args.what == "nonlinearity":
        pts = _read_points(path)
        try:
            fit = fit_power_law(pts)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        run = _Run(Path(args.out), argv, seed, {"fit": "nonlinearity", "input": str(path)})
        run.write("fit.json", dumps(fit.to_dict()))
        run.finish()
        print(f"n = {fit.exponent:.3f} +/- {fit.exponent_sigma:.3f}")
        return EXIT_OK

    if args.n is None or args.n < 1:
        raise UsageError("modes fit needs --n >= 1")
    try:
        hist = CountHistogram.from_csv(path.read_text())
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if args.m_min < 1 or args.m_max < args.m_min:
        raise UsageError("need 1 <= --m-min <= --m-max")
    fit = estimate_mode_count(hist, args.n, (args.m_min, args.m_max), metric=args.metric,
                              background_mean=args.background)
    run = _Run(Path(args.out), argv, seed, {
        "fit": "modes", "input": str(path), "n": args.n, "m_range": [args.m_min, args.m_max],
        "metric": args.metric, "background": args.background,
    })
    run.write("fit.json", dumps(fit.to_dict()))
    run.write("profile.csv", profile_csv(fit))
    run.finish()
    print(f"m = {fit.m_hat} [{fit.ci_low}, {fit.ci_high}]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def _count_law(text: str):
    try:
        kind, value = text.split(":", 1)
        if kind == "fixed":
            k = int(value)
            if k < 0:
                raise ValueError
            return lambda rng, size: np.full(size, k, dtype=np.int64)
        if kind == "poisson":
            mu = float(value)
            if mu < 0:
                raise ValueError
            return lambda rng, size: rng.poisson(mu, size)
    except ValueError:
        pass
    raise UsageError(f"bad --count-law {text!r}; use fixed:<k> or poisson:<mean>")


def _spot_model(args) -> SpotModel:
    try:
        return SpotModel(sigma_px=args.sigma, threshold=args.threshold,
                         noise_sigma=args.noise, min_area_px=args.min_area)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_frames(args, argv) -> int:
    model = _spot_model(args)
    seed = _seed(args)
    if args.what == "generate":
        if args.frames < 1:
            raise UsageError("--frames must be >= 1")
        law = _count_law(args.count_law)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        truth = law(rng, args.frames)
        run = _Run(Path(args.out), argv, seed, {
            "frames": args.frames, "count_law": args.count_law, "width": args.width,
            "height": args.height, "separation": args.separation, "spot_model": vars(model),
        })
        sep = args.separation * model.sigma_px if args.separation else None
        for i, k in enumerate(truth):
            frame = generate_frame(int(k), model, (args.width, args.height), rng, i, sep)
            p = frame_path(run.out, i)
            write_pgm(p, frame)
            run.track(p)
        run.write("truth.csv", "index,count\n" + "".join(f"{i},{int(k)}\n" for i, k in enumerate(truth)))
        run.finish()
        print(f"wrote {args.frames} frames to {args.out}")
        return EXIT_OK

    try:
        paths = list_frames(args.input)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    if not paths:
        raise UsageError(f"no frame_<index>.pgm files in {args.input}")
    result = analyze_frame_stream(paths, model)
    run = _Run(Path(args.out), argv, seed, {"input": str(args.input), "spot_model": vars(model)})
    run.write("histogram.csv", result.histogram.to_csv())
    run.write("summary.json", dumps(result.summary()))
    run.finish()
    print(f"frames={result.histogram.total_pulses} mean={result.histogram.mean():.4g} "
          f"skipped={len(result.skipped)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------

def cmd_reproduce(args, argv) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure {args.figure!r}; valid ids: {', '.join(FIGURES)}")
    seed = _seed(args)
    bundle = reproduce(args.figure, seed=seed, pulses=args.pulses)
    run = _Run(Path(args.out), argv, seed, {"figure": args.figure, "pulses": args.pulses})
    for name, text in sorted(bundle.csv.items()):
        run.write(name, text)
    for name, text in sorted(bundle.svg.items()):
        run.write(name, text)
    run.write(f"{args.figure}_summary.json", dumps(bundle.summary))
    run.finish()
    print(f"{args.figure}: {len(bundle.csv)} CSV, {len(bundle.svg)} SVG -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="photostat",
                description="Electron-number statistics: simulate, fit, count frames, reproduce figures.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo electron-count histogram")
    s.add_argument("--source", choices=("coherent", "bsv"), required=True)
    s.add_argument("--mean", type=_positive_float, help="target detected mean per pulse")
    s.add_argument("--coupling", type=float, help="mean emitted electrons at the reference energy")
    s.add_argument("--energy", type=_positive_float, default=1.0, help="pulse energy (nJ)")
    s.add_argument("--reference-energy", type=_positive_float, default=None)
    s.add_argument("--modes", type=_positive_int, default=1)
    s.add_argument("--nonlinearity", type=float, default=4.0)
    s.add_argument("--efficiency", type=float, default=1.0)
    s.add_argument("--background", type=float, default=0.0)
    s.add_argument("--pulses", type=int, required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit nonlinearity or mode count")
    fsub = f.add_subparsers(dest="what", required=True, parser_class=_Parser)
    fn = fsub.add_parser("nonlinearity", help="power law from energy,mean CSV")
    fn.add_argument("input")
    fn.add_argument("--out", required=True)
    fn.add_argument("--seed", type=int, default=None)
    fm = fsub.add_parser("modes", help="mode count from a k,frequency histogram CSV")
    fm.add_argument("input")
    fm.add_argument("--n", type=int, default=None, required=True)
    fm.add_argument("--m-min", type=int, default=1)
    fm.add_argument("--m-max", type=int, default=80)
    fm.add_argument("--metric", choices=("nll", "chi2"), default="nll")
    fm.add_argument("--background", type=float, default=0.0)
    fm.add_argument("--out", required=True)
    fm.add_argument("--seed", type=int, default=None)

    fr = sub.add_parser("frames", help="synthetic frames and blob counting")
    frsub = fr.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("generate", "count"):
        q = frsub.add_parser(name)
        if name == "generate":
            q.add_argument("--frames", type=int, required=True)
            q.add_argument("--count-law", default="poisson:5")
            q.add_argument("--width", type=_positive_int, default=256)
            q.add_argument("--height", type=_positive_int, default=256)
            q.add_argument("--separation", type=float, default=6.0,
                           help="minimum spot spacing in units of sigma (0 allows overlap)")
        else:
            q.add_argument("input")
        q.add_argument("--sigma", type=_positive_float, default=1.5)
        q.add_argument("--threshold", type=float, default=500.0)
        q.add_argument("--noise", type=float, default=20.0)
        q.add_argument("--min-area", type=_positive_int, default=3)
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--out", required=True)

    r = sub.add_parser("reproduce", help="regenerate a figure panel")
    r.add_argument("figure", help=f"one of: {', '.join(FIGURES)}")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--pulses", type=_positive_int, default=None)
    r.add_argument("--out", required=True)
    return p


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "frames": cmd_frames,
            "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.cmd](args, argv)
    except UsageError as exc:
        print(f"photostat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DistributionError, FitError, FrameError, ValueError, OSError) as exc:
        print(f"photostat: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
