"""Repeated-trial experiment runner, result files and the ``ramopt`` command line.

A trial draws its instance from ``seed_base + i`` and its starting point from
an independent stream, optionally warm-starts with a short gradient-descent
run, then hands over to the selected solver. Summaries report the success
rate and geometric means of terminal gradient norms and wall-clock times.
"""

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import LineSearchConfig, run_fixed_point, run_rgd, run_rlbfgs
from .mixing import MixingConfig, Status, TraceRow, run_mixing
from .problems import PROBLEMS, build_problem, initial_point, save_header

logger = logging.getLogger(__name__)

__all__ = [
    "SOLVERS",
    "SUMMARY_HEADER",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentSummary",
    "geometric_mean",
    "run_trial",
    "run_experiment",
    "emit_outputs",
    "read_records",
    "cli_main",
    "main",
]

SOLVERS = ("ram", "rram", "rgd", "rlbfgs", "fixedpoint")
SUMMARY_HEADER = ("problem", "dims", "solver", "trials", "rate", "grad_gm", "time_gm_s", "seed_base")

#: offset separating the starting-point stream from the instance seed
START_OFFSET = 2**63


@dataclass(frozen=True)
class ExperimentConfig:
    """What to run and how often.

    ``scale`` is ``"auto"`` (``1 / max`` of the matrix dimensions), ``"none"``
    (``lam = 1``) or a positive float. ``warm_start=None`` picks the default
    for the solver: on for RAM, off for everything else. ``mixing`` supplies
    the RAM/RRAM settings; its ``variant``, ``scale``, ``max_iter`` and ``tol``
    are overridden from this config.
    """

    problem: str
    dims: dict
    solver: str
    trials: int = 10
    seed_base: int = 0
    max_iter: int = 1000
    tol: float = 1e-6
    scale: object = "auto"
    warm_start: Optional[bool] = None
    warm_tol: float = 1e-2
    warm_max_iter: int = 100
    mixing: MixingConfig = field(default_factory=MixingConfig)
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if isinstance(self.scale, str):
            if self.scale not in ("auto", "none"):
                raise ValueError(f"scale must be 'auto', 'none' or a positive number, got {self.scale!r}")
        elif not float(self.scale) > 0.0:
            raise ValueError("scale must be positive")

    @property
    def use_warm_start(self):
        return self.solver == "ram" if self.warm_start is None else bool(self.warm_start)

    def resolve_scale(self, problem):
        if self.scale == "auto":
            return problem.auto_scale
        if self.scale == "none":
            return 1.0
        return float(self.scale)

    def dims_label(self):
        return ";".join(f"{k}={v}" for k, v in self.dims.items())


@dataclass
class TrialRecord:
    trial: int
    seed: int
    status: str
    iterations: int
    grad_unscaled: float
    grad_scaled: float
    time_s: float
    warm_iterations: int
    scale: float

    def to_json(self):
        return json.dumps(dataclasses.asdict(self))


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    records: list
    traces: list
    rate: float
    grad_gm: float
    time_gm_s: float


def geometric_mean(values, floor=1e-300):
    """``exp(mean(log(max(v, floor))))``."""
    v = np.maximum(np.asarray(values, dtype=float), floor)
    return float(np.exp(np.mean(np.log(v))))


def _aggregate(records):
    n = len(records)
    rate = sum(r.status == Status.CONVERGED.value for r in records) / n
    return rate, geometric_mean([r.grad_unscaled for r in records]), geometric_mean([r.time_s for r in records])


def run_trial(cfg, i):
    """Run trial ``i`` of ``cfg``; returns ``(TrialRecord, trace_rows)``."""
    seed = cfg.seed_base + i
    problem = build_problem(cfg.problem, seed, **cfg.dims)
    x0 = initial_point(problem, np.random.default_rng(seed + START_OFFSET))
    lam = cfg.resolve_scale(problem)
    warm_iters, warm_time = 0, 0.0

    t0 = time.perf_counter()
    if cfg.use_warm_start:
        warm = run_rgd(problem, x0, cfg.line_search, max_iter=cfg.warm_max_iter, tol=cfg.warm_tol)
        x0, warm_iters = warm.x, warm.iterations
        warm_time = time.perf_counter() - t0

    if cfg.solver in ("ram", "rram"):
        mcfg = dataclasses.replace(cfg.mixing, variant=cfg.solver, scale=lam, max_iter=cfg.max_iter, tol=cfg.tol)
        report = run_mixing(problem, x0, mcfg)
    elif cfg.solver == "rgd":
        report = run_rgd(problem, x0, cfg.line_search, max_iter=cfg.max_iter, tol=cfg.tol)
    elif cfg.solver == "rlbfgs":
        report = run_rlbfgs(problem, x0, cfg.line_search, max_iter=cfg.max_iter, tol=cfg.tol)
    else:
        report = run_fixed_point(problem, x0, lam, max_iter=cfg.max_iter, tol=cfg.tol)
    elapsed = time.perf_counter() - t0

    # trace times include the warm start so they line up with wall clock
    rows = [dataclasses.replace(row, elapsed_s=row.elapsed_s + warm_time) for row in report.trace]
    g = report.grad_norm
    record = TrialRecord(
        trial=i,
        seed=seed,
        status=str(report.status),
        iterations=report.iterations,
        grad_unscaled=float(g),
        grad_scaled=float(lam * g),
        time_s=elapsed,
        warm_iterations=warm_iters,
        scale=lam,
    )
    return record, rows


def _run_trial_safe(cfg, i):
    try:
        return run_trial(cfg, i)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        # a numerical blow-up counts as a failed trial, not a harness failure
        logger.warning("trial %d failed: %s", i, exc)
        record = TrialRecord(i, cfg.seed_base + i, Status.NUMERICAL_ERROR.value, 0, math.inf, math.inf, 0.0, 0, math.nan)
        return record, []


def _worker_count(cfg):
    workers = max(1, int(cfg.workers))
    cap = os.environ.get("RAMOPT_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    return min(workers, cfg.trials)


def run_experiment(cfg):
    """Run every trial of ``cfg`` and aggregate the results."""
    workers = _worker_count(cfg)
    if workers == 1:
        results = [_run_trial_safe(cfg, i) for i in range(cfg.trials)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_safe, [cfg] * cfg.trials, range(cfg.trials)))
    results.sort(key=lambda item: item[0].trial)
    records = [r for r, _ in results]
    traces = [t for _, t in results]
    rate, grad_gm, time_gm = _aggregate(records)
    return ExperimentSummary(cfg, records, traces, rate, grad_gm, time_gm)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def emit_outputs(summary, out_dir):
    """Write ``summary.csv``, ``trials.jsonl`` and ``traces/trial_NNN.csv`` under ``out_dir``.

    Returns the paths written. Floats are written with ``repr`` so values
    recomputed from the JSON lines match the summary exactly.
    """
    out = Path(out_dir)
    cfg = summary.config
    try:
        (out / "traces").mkdir(parents=True, exist_ok=True)
        summary_path = out / "summary.csv"
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            w.writerow([
                cfg.problem, cfg.dims_label(), cfg.solver, cfg.trials,
                _fmt(summary.rate), _fmt(summary.grad_gm), _fmt(summary.time_gm_s), cfg.seed_base,
            ])
        records_path = out / "trials.jsonl"
        with open(records_path, "w") as fh:
            for rec in summary.records:
                fh.write(rec.to_json() + "\n")
        trace_paths = []
        for rec, rows in zip(summary.records, summary.traces):
            path = out / "traces" / f"trial_{rec.trial:03d}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TraceRow.FIELDS)
                for row in rows:
                    w.writerow([_fmt(v) for v in row.astuple()])
            trace_paths.append(path)
    except OSError as exc:
        raise OSError(f"could not write results under {out}: {exc}") from exc
    return [summary_path, records_path, *trace_paths]


def read_records(path):
    """Load the per-trial JSON lines written by :func:`emit_outputs`."""
    with open(path) as fh:
        return [TrialRecord(**json.loads(line)) for line in fh if line.strip()]


# --- command line ---------------------------------------------------------------


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _scale_arg(text):
    if text in ("auto", "none"):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected auto, none or a positive number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("scale must be positive")
    return value


def _problem_flags(p):
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m-count", type=int, dest="m_count", help="number of matrices (karcher)")
    p.add_argument("--tau", type=float, help="edge sparsity (maxcut)")
    p.add_argument("--sampling", choices=("uniform", "gaussian"), help="observation rule (matcomp)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", type=Path, help="flat key=value file; command-line flags take precedence")


def _build_parser():
    parser = _Parser(prog="ramopt", description="Riemannian Anderson mixing experiments.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="run repeated trials of one solver on one problem")
    _problem_flags(run)
    run.add_argument("--solver", choices=SOLVERS)
    run.add_argument("--beta", type=float)
    run.add_argument("--memory", type=int)
    run.add_argument("--max-iter", type=int, dest="max_iter")
    run.add_argument("--tol", type=float)
    run.add_argument("--trials", type=int)
    run.add_argument("--warm-start", action=argparse.BooleanOptionalAction, dest="warm_start", default=None)
    run.add_argument("--scale", type=_scale_arg)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", type=Path)

    ver = sub.add_parser("verify", help="run the numerical verification suites")
    ver.add_argument("--suite", choices=("geometry", "gradients", "oracle", "all"), default="all")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--json", type=Path, help="also write the probe reports as JSON")

    gen = sub.add_parser("gen", help="write an instance header")
    _problem_flags(gen)
    gen.add_argument("--out", type=Path, required=True)
    return parser


_BOOL = {"true": True, "1": True, "yes": True, "on": True, "false": False, "0": False, "no": False, "off": False}


def _read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _merge(args, conf, key, convert, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in conf:
        try:
            return convert(conf[key])
        except (ValueError, KeyError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad config value for {key}: {conf[key]!r} ({exc})")
    return default


def _choice(options):
    def convert(text):
        if text not in options:
            raise ValueError(f"expected one of {options}")
        return text
    return convert


def _problem_dims(args, conf):
    problem = _merge(args, conf, "problem", _choice(PROBLEMS))
    if problem is None:
        raise UsageError("--problem is required")
    n = _merge(args, conf, "n", int)
    if n is None:
        raise UsageError("--n is required")
    dims = {"n": n}
    need = {"maxcut": ("p",), "brockett": ("p",), "matcomp": ("k",), "karcher": ("m_count",), "rayleigh": ()}
    for key in need[problem]:
        value = _merge(args, conf, key, int)
        if value is None:
            raise UsageError(f"--{key.replace('_', '-')} is required for {problem}")
        dims["m" if key == "m_count" else key] = value
    if problem == "maxcut":
        dims["tau"] = _merge(args, conf, "tau", float, 0.3)
    if problem == "matcomp":
        sampling = _merge(args, conf, "sampling", _choice(("uniform", "gaussian")))
        if sampling:
            dims["sampling"] = sampling
    return problem, dims


def _cmd_run(args, conf):
    problem, dims = _problem_dims(args, conf)
    solver = _merge(args, conf, "solver", _choice(SOLVERS))
    if solver is None:
        raise UsageError("--solver is required")
    memory_default = {"maxcut": 1, "brockett": dims.get("p", 0) + 1}.get(problem, 3)
    iter_default = {"maxcut": 150, "brockett": 1500}.get(problem, 1000)
    warm = _merge(args, conf, "warm_start", lambda s: _BOOL[s.lower()])
    if solver == "rram" and warm:
        logger.warning("warm start requested for rram; the default is to run it cold")
    try:
        cfg = ExperimentConfig(
            problem=problem,
            dims=dims,
            solver=solver,
            trials=_merge(args, conf, "trials", int, 10),
            seed_base=_merge(args, conf, "seed", int, 0),
            max_iter=_merge(args, conf, "max_iter", int, iter_default),
            tol=_merge(args, conf, "tol", float, 1e-6),
            scale=_merge(args, conf, "scale", _scale_arg, "auto"),
            warm_start=warm,
            mixing=MixingConfig(
                beta=_merge(args, conf, "beta", float, 0.6),
                memory=_merge(args, conf, "memory", int, memory_default),
            ),
            workers=_merge(args, conf, "workers", int, 1),
        )
    except ValueError as exc:
        raise UsageError(f"ramopt run: {exc}")
    summary = run_experiment(cfg)
    for rec in summary.records:
        print(
            f"trial {rec.trial:3d}  seed {rec.seed}  {rec.status:<14s} iters {rec.iterations:5d}  "
            f"grad {rec.grad_unscaled:.3e}  time {rec.time_s:.3f}s  warm {rec.warm_iterations}"
        )
    print(
        f"{cfg.problem} [{cfg.dims_label()}] {cfg.solver}: rate {summary.rate:.2f}  "
        f"grad_gm {summary.grad_gm:.3e}  time_gm {summary.time_gm_s:.3f}s"
    )
    out = _merge(args, conf, "out", Path)
    if out is not None:
        emit_outputs(summary, out)
        print(f"results written to {out}")
    return 0


def _cmd_verify(args):
    from .verify import format_reports, run_suite

    reports = run_suite(args.suite, seed=args.seed)
    print(format_reports(reports))
    if args.json is not None:
        with open(args.json, "w") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2)
            fh.write("\n")
    return 0 if all(r.ok for r in reports) else 2


def _cmd_gen(args, conf):
    problem, dims = _problem_dims(args, conf)
    try:
        instance = build_problem(problem, _merge(args, conf, "seed", int, 0), **dims)
    except ValueError as exc:
        raise UsageError(f"ramopt gen: {exc}")
    save_header(instance, args.out)
    print(f"wrote {args.out}")
    return 0


def cli_main(argv=None):
    """Entry point for ``ramopt``. Returns 0 on success, 1 on usage errors, 2 on runtime failures."""
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        conf = _read_config(args.config) if getattr(args, "config", None) else {}
        if args.command == "run":
            return _cmd_run(args, conf)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_gen(args, conf)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logger.error("%s: %s", type(exc).__name__, exc)
        return 2


def main():
    return cli_main(sys.argv[1:])
