"""Command line entry point: ``hankel-denoise {bench,denoise,paper-figures,mp-median}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .exceptions import HankelDenoiseError
from .hankel_core import Transform, TransformKind, build_hankel, build_transform, hankel_project, hankel_signal
from .io import atomic_write_text, fmt, read_signal_csv, signal_to_csv
from .shrinkage import mp_median
from .slra import IterationConfig

# flag dest -> builtin default; a JSON config file may set any of these
BENCH_DEFAULTS = {
    "example": "trajectory",
    "order": 4,
    "rows": 8,
    "length": None,
    "sigma2": 0.1,
    "trials": 100,
    "seed": 0,
    "eps": 1e-5,
    "max_iters": 500,
    "out": None,
    "format": "csv",
    "fixed_system": False,
    "timing": False,
}
DENOISE_DEFAULTS = {"method": "LRHD", "input": None, "input_u": None, "rows": None, "rank": None,
                    "eps": 1e-5, "max_iters": 500, "out": None}


class UsageError(Exception):
    pass


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hankel-denoise", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="Monte Carlo comparison on one configuration")
    b.add_argument("--config", type=Path, help="JSON file with any of the flags below")
    b.add_argument("--example", choices=["trajectory", "impulse"])
    b.add_argument("--order", type=_positive_int)
    b.add_argument("--rows", type=_positive_int)
    b.add_argument("--length", type=_positive_int)
    b.add_argument("--sigma2", type=_positive_float)
    b.add_argument("--trials", type=_positive_int)
    b.add_argument("--seed", type=_nonneg_int)
    b.add_argument("--eps", type=_positive_float)
    b.add_argument("--max-iters", type=_positive_int)
    b.add_argument("--fixed-system", action="store_true", default=None,
                   help="reuse one random system across all trials")
    b.add_argument("--timing", action="store_true", default=None,
                   help="fill the wall_ms column (makes output run-dependent)")
    b.add_argument("--out", type=Path)
    b.add_argument("--format", choices=["csv", "json"])

    d = sub.add_parser("denoise", help="denoise a signal read from CSV")
    d.add_argument("--config", type=Path)
    d.add_argument("--method", help="one of " + ", ".join(m.value for m in bench.MethodId))
    d.add_argument("--input", type=Path, help="noisy signal, one value per line")
    d.add_argument("--input-u", type=Path,
                   help="exact input signal; switches to input-output trajectory denoising")
    d.add_argument("--rows", type=_positive_int)
    d.add_argument("--rank", type=_nonneg_int)
    d.add_argument("--eps", type=_positive_float)
    d.add_argument("--max-iters", type=_positive_int)
    d.add_argument("--out", type=Path)

    p = sub.add_parser("paper-figures", help="all four study configurations")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--eps", type=_positive_float, default=1e-5)
    p.add_argument("--max-iters", type=_positive_int, default=500)
    p.add_argument("--fixed-system", action="store_true")
    p.add_argument("--timing", action="store_true")

    mp = sub.add_parser("mp-median", help="median of the Marchenko-Pastur law")
    mp.add_argument("--beta", type=_positive_float, required=True)
    mp.add_argument("--out", type=Path)
    return parser


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """builtin defaults < config file < explicit flags"""
    merged = dict(defaults)
    if getattr(args, "config", None) is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            merged[dest] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def cmd_bench(args) -> int:
    opts = _merge(args, BENCH_DEFAULTS)
    if opts["format"] not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {opts['format']!r}")
    try:
        cfg = bench.BenchmarkConfig(
            example=opts["example"], sigma2=float(opts["sigma2"]), order=int(opts["order"]),
            rows=int(opts["rows"]), length=None if opts["length"] is None else int(opts["length"]),
            trials=int(opts["trials"]), seed=int(opts["seed"]), eps=float(opts["eps"]),
            max_iters=int(opts["max_iters"]), fixed_system=bool(opts["fixed_system"]),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    records = bench.run_benchmark(cfg)
    timing = bool(opts["timing"])
    if opts["format"] == "json":
        text = bench.results_to_json(cfg, records, timing)
    else:
        text = bench.records_to_csv(records, timing)
    _emit(text, opts["out"])
    if opts["out"] is not None:
        print(bench.summary_to_csv(bench.summarize(records)), end="", file=sys.stderr)
    return 0


def cmd_denoise(args) -> int:
    opts = _merge(args, DENOISE_DEFAULTS)
    for key in ("input", "rows", "rank"):
        if opts[key] is None:
            raise UsageError(f"denoise needs --{key}")
    try:
        method = bench.MethodId.parse(str(opts["method"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    y = read_signal_csv(opts["input"])
    rows, rank = int(opts["rows"]), int(opts["rank"])
    W = build_hankel(y, rows)
    if opts["input_u"] is not None:
        u = read_signal_csv(opts["input_u"])
        if u.size != y.size:
            raise UsageError("input and output signals differ in length")
        transform = build_transform(TransformKind.NULL_SPACE_PROJECTOR, W.shape[1], build_hankel(u, rows))
    else:
        transform = Transform.identity(W.shape[1])
    cfg = IterationConfig(float(opts["eps"]), int(opts["max_iters"]))
    X_hat, converged, iters = bench.run_method(method, W, transform, rank, cfg)
    if not converged:
        logging.getLogger(__name__).warning("%s stopped after %d iterations without converging", method.value, iters)
    _emit(signal_to_csv(hankel_signal(hankel_project(X_hat))), opts["out"])
    return 0


def cmd_paper_figures(args) -> int:
    written = bench.paper_figures(args.out, trials=args.trials, seed=args.seed, eps=args.eps,
                                  max_iters=args.max_iters, timing=args.timing, fixed_system=args.fixed_system)
    for path in written:
        print(path, file=sys.stderr)
    return 0


def cmd_mp_median(args) -> int:
    if args.beta > 1:
        raise UsageError("beta must lie in (0, 1]")
    _emit(fmt(mp_median(args.beta)) + "\n", args.out)
    return 0


COMMANDS = {
    "bench": cmd_bench,
    "denoise": cmd_denoise,
    "paper-figures": cmd_paper_figures,
    "mp-median": cmd_mp_median,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hankel-denoise {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, HankelDenoiseError, ValueError) as exc:
        print(f"hankel-denoise {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
