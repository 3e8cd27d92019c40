"""Monte Carlo comparison of the estimators on the LTI case studies.

Every trial draws one system and one noise realization, hands the same
``(W, Pi, r)`` to every method and scores it with the noise reduction
measure ``F = 100 (1 - ||X - X_hat|| / ||X - W||)``.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateInputError, InvalidRankError
from .hankel_core import Transform
from .io import atomic_write_text, fmt
from .lti_lab import instance_hash, make_impulse_instance, make_trajectory_instance, random_stable_system
from .shrinkage import (
    ShrinkagePolicy,
    apply_shrinkage,
    data_driven_shrinker,
    estimate_noise_level,
    soft_threshold_value,
    spectral_dims,
    tsvd_estimate,
)
from .slra import IterationConfig, lrhd, nuclear_norm_denoise, slra_iterative

log = logging.getLogger(__name__)

WORKERS_ENV = "HANKELDENOISE_WORKERS"
CSV_HEADER = "trial,method,F,converged,iterations,wall_ms"
#: methods compared in the study that this package does not provide
NOT_IMPLEMENTED = {"SLRA": "external local-optimization SLRA package; not reimplemented"}


class MethodId(str, enum.Enum):
    TSVD = "TSVD"
    ITER = "Iter"
    NUC = "Nuc"
    SHRINK = "Shrink"
    HARD = "Hard"
    DD = "DD"
    LRHD = "LRHD"

    @classmethod
    def parse(cls, name: str) -> "MethodId":
        for m in cls:
            if m.value.lower() == name.lower():
                return m
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(m.value for m in cls)}")


METHOD_ORDER = {m: i for i, m in enumerate(MethodId)}
DEFAULT_LENGTH = {"trajectory": 96, "impulse": 40}


@dataclass(frozen=True)
class BenchmarkConfig:
    example: str = "trajectory"
    sigma2: float = 0.1
    order: int = 4
    rows: int = 8
    length: Optional[int] = None
    trials: int = 100
    seed: int = 0
    eps: float = 1e-5
    max_iters: int = 500
    fixed_system: bool = False

    def __post_init__(self):
        if self.example not in DEFAULT_LENGTH:
            raise ValueError(f"example must be 'trajectory' or 'impulse', got {self.example!r}")
        if self.length is None:
            object.__setattr__(self, "length", DEFAULT_LENGTH[self.example])
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.order < 1 or self.rows <= self.order:
            raise ValueError("need order >= 1 and rows > order")
        if self.length < self.rows + self.order:
            raise ValueError("length too short for the requested rows and order")
        if not self.eps > 0 or self.max_iters < 1:
            raise ValueError("need eps > 0 and max_iters >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def label(self) -> str:
        return f"{self.example}_sigma2_{fmt(self.sigma2)}"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


PAPER_CONFIGS = (
    BenchmarkConfig("trajectory", 0.1),
    BenchmarkConfig("trajectory", 0.01),
    BenchmarkConfig("impulse", 0.01),
    BenchmarkConfig("impulse", 0.001),
)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    method: MethodId
    F: float
    converged: bool
    iterations: int
    wall_ms: float
    instance_hash: str = ""


def noise_reduction(X, X_hat, W) -> float:
    """Percentage of the measurement error removed by ``X_hat``."""
    X = np.asarray(X, dtype=float)
    den = np.linalg.norm(X - np.asarray(W, dtype=float))
    if den == 0.0:
        raise DegenerateInputError("measurement equals the noise-free matrix")
    return float(100.0 * (1.0 - np.linalg.norm(X - np.asarray(X_hat, dtype=float)) / den))


def run_method(method: MethodId, W: np.ndarray, transform: Transform, r: int, cfg: IterationConfig):
    """Run one estimator; returns ``(X_hat, converged, iterations)``."""
    method = MethodId(method)
    if method is MethodId.TSVD:
        return tsvd_estimate(W, transform, r), True, 1
    if method is MethodId.ITER:
        X, tr = slra_iterative(W, transform, r, cfg)
        return X, tr.converged, tr.iterations
    if method is MethodId.NUC:
        _, q, beta = spectral_dims(W.shape)
        tau = soft_threshold_value(beta, estimate_noise_level(W, transform), q)
        X, tr = nuclear_norm_denoise(W, transform, tau, cfg)
        return X, tr.converged, tr.iterations
    if method is MethodId.SHRINK:
        return apply_shrinkage(W, transform, ShrinkagePolicy.optimal()), True, 1
    if method is MethodId.HARD:
        return apply_shrinkage(W, transform, ShrinkagePolicy.hard()), True, 1
    if method is MethodId.DD:
        return data_driven_shrinker(W, transform, r), True, 1
    if method is MethodId.LRHD:
        X, tr = lrhd(W, transform, r, cfg)
        return X, tr.converged, tr.iterations
    raise InvalidRankError(f"unhandled method {method}")


def trial_seeds(cfg: BenchmarkConfig, trial: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """``(system, noise)`` seed sequences, a pure function of root seed and trial index."""
    sys_seq, noise_seq = np.random.SeedSequence([cfg.seed, trial]).spawn(2)
    if cfg.fixed_system:
        sys_seq = np.random.SeedSequence([cfg.seed])
    return sys_seq, noise_seq


def make_instance(cfg: BenchmarkConfig, trial: int):
    sys_seq, noise_seq = trial_seeds(cfg, trial)
    system = random_stable_system(cfg.order, np.random.default_rng(sys_seq))
    make = make_trajectory_instance if cfg.example == "trajectory" else make_impulse_instance
    return make(system, cfg.length, cfg.rows, cfg.sigma2, np.random.default_rng(noise_seq))


def run_trial(cfg: BenchmarkConfig, trial: int, methods: Sequence[MethodId] = tuple(MethodId)) -> list[TrialRecord]:
    inst = make_instance(cfg, trial)
    W, transform, r = inst.problem()
    X = inst.X
    digest = instance_hash(inst)
    icfg = IterationConfig(cfg.eps, cfg.max_iters)
    out = []
    for method in methods:
        t0 = time.perf_counter()
        X_hat, converged, iters = run_method(method, W, transform, r, icfg)
        wall = (time.perf_counter() - t0) * 1e3
        out.append(TrialRecord(trial, MethodId(method), noise_reduction(X, X_hat, W), bool(converged), int(iters), wall, digest))
    return out


def _run_trial_star(args):
    return run_trial(*args)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


def run_benchmark(cfg: BenchmarkConfig, workers: Optional[int] = None,
                  methods: Sequence[MethodId] = tuple(MethodId)) -> list[TrialRecord]:
    """All ``trials x methods`` records, sorted by trial then method.

    Trials are independent, so they may be spread over ``workers``
    processes without changing any score.
    """
    workers = worker_count() if workers is None else max(int(workers), 1)
    jobs = [(cfg, t, tuple(methods)) for t in range(cfg.trials)]
    if workers == 1:
        batches = map(_run_trial_star, jobs)
        records = [rec for batch in batches for rec in batch]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [rec for batch in pool.map(_run_trial_star, jobs) for rec in batch]
    records.sort(key=lambda rec: (rec.trial, METHOD_ORDER[rec.method]))
    n_fail = sum(not rec.converged for rec in records)
    if n_fail:
        log.info("%s: %d of %d runs hit the iteration cap", cfg.label, n_fail, len(records))
    return records


# --- summaries and output ---------------------------------------------------------------


def _rounded(x: float) -> float:
    return float(fmt(x))


def summarize(records: Sequence[TrialRecord]) -> dict[str, dict[str, float]]:
    """Boxplot statistics per method, computed from the 12-digit values that
    the CSV output carries so that re-reading a results file reproduces them."""
    out = {}
    for method in MethodId:
        rows = [rec for rec in records if rec.method is method]
        if not rows:
            continue
        F = np.array([_rounded(rec.F) for rec in rows])
        q1, med, q3 = np.percentile(F, [25, 50, 75])
        out[method.value] = {
            "count": len(rows),
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "min": float(F.min()),
            "max": float(F.max()),
            "mean": float(F.mean()),
            "converged_rate": sum(rec.converged for rec in rows) / len(rows),
        }
    return out


def records_to_csv(records: Sequence[TrialRecord], timing: bool = False) -> str:
    lines = [CSV_HEADER]
    for rec in records:
        wall = fmt(rec.wall_ms) if timing else ""
        lines.append(f"{rec.trial},{rec.method.value},{fmt(rec.F)},{str(rec.converged).lower()},{rec.iterations},{wall}")
    return "\n".join(lines) + "\n"


def records_from_csv(text: str) -> list[TrialRecord]:
    lines = text.strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a benchmark results file")
    out = []
    for line in lines[1:]:
        trial, method, F, conv, iters, wall = line.split(",")
        out.append(TrialRecord(int(trial), MethodId(method), float(F), conv == "true", int(iters),
                               float(wall) if wall else float("nan")))
    return out


SUMMARY_HEADER = "method,count,median,q1,q3,min,max,mean,converged_rate"


def summary_to_csv(summary: dict) -> str:
    lines = [SUMMARY_HEADER]
    for method, s in summary.items():
        lines.append(",".join([method, str(s["count"])] + [fmt(s[k]) for k in SUMMARY_HEADER.split(",")[2:]]))
    for method in NOT_IMPLEMENTED:
        lines.append(f"{method},0" + ",not-implemented" * 7)
    return "\n".join(lines) + "\n"


def results_to_json(cfg: BenchmarkConfig, records: Sequence[TrialRecord], timing: bool = False) -> str:
    doc = {
        "config": cfg.to_dict(),
        "not_implemented": NOT_IMPLEMENTED,
        "summary": summarize(records),
        "records": [
            {
                "trial": rec.trial,
                "method": rec.method.value,
                "F": _rounded(rec.F),
                "converged": rec.converged,
                "iterations": rec.iterations,
                "wall_ms": _rounded(rec.wall_ms) if timing else None,
                "instance_hash": rec.instance_hash,
            }
            for rec in records
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def write_results(path, cfg: BenchmarkConfig, records: Sequence[TrialRecord], fmt_name: str = "csv",
                  timing: bool = False) -> None:
    if fmt_name == "json":
        atomic_write_text(path, results_to_json(cfg, records, timing))
    else:
        atomic_write_text(path, records_to_csv(records, timing))


def paper_figures(out_dir, trials: int = 100, seed: int = 0, eps: float = 1e-5, max_iters: int = 500,
                  workers: Optional[int] = None, timing: bool = False, fixed_system: bool = False) -> list:
    """Run the four study configurations; write raw and summary CSVs per configuration."""
    written = []
    meta = {"not_implemented": NOT_IMPLEMENTED, "configs": []}
    for base in PAPER_CONFIGS:
        cfg = dataclasses.replace(base, trials=trials, seed=seed, eps=eps, max_iters=max_iters,
                                  fixed_system=fixed_system)
        records = run_benchmark(cfg, workers)
        raw = os.path.join(out_dir, f"{cfg.label}_trials.csv")
        summ = os.path.join(out_dir, f"{cfg.label}_summary.csv")
        atomic_write_text(raw, records_to_csv(records, timing))
        atomic_write_text(summ, summary_to_csv(summarize(records)))
        meta["configs"].append(cfg.to_dict())
        written.append(summ)
    atomic_write_text(os.path.join(out_dir, "metadata.json"), json.dumps(meta, indent=2) + "\n")
    return written
