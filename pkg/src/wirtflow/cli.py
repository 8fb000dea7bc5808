"""Command-line harness: instance simulation, single solves, dose-sweep
benchmarks and variance-stabilization tables.

Subcommands: ``simulate``, ``solve``, ``benchmark``, ``vst-analyze``.
Exit codes: 0 success, 1 configuration error, 2 runtime failure.

Seed discipline: the instance for dose index i and repetition r uses
``derive_seed(master_seed, i, r)``, a 64-bit value drawn from
``numpy.random.SeedSequence(master_seed, spawn_key=(i, r))``. All losses in
a benchmark solve the same instance for a given (dose, repetition) cell, so
comparisons across losses are paired.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import ConfigError, NoConstantBoundError
from .linalg import complex_standard_normal
from .losses import LOSS_KINDS, make_loss
from .metrics import RunSummary, aggregate, relative_error, write_summary_csv
from .simulate import (FrameSpec, gen_instance, load_instance, save_instance)
from .solver import STEP_MODES, SolverConfig, solve, spectral_init
from .vst import make_transform, variance_curve

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

DEFAULT_MASTER_SEED = 20260810


# -- experiment configuration ----------------------------------------------

@dataclass
class LossEntry:
    """One loss in a sweep; ``step_mode`` overrides the solver default."""

    kind: str
    params: dict = field(default_factory=dict)
    step_mode: str | None = None

    def param_str(self) -> str:
        return ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": dict(self.params)}
        if self.step_mode is not None:
            d["step_mode"] = self.step_mode
        return d

    @staticmethod
    def from_dict(d: dict) -> "LossEntry":
        return LossEntry(kind=d["kind"], params=dict(d.get("params", {})),
                         step_mode=d.get("step_mode"))


@dataclass
class SolverSettings:
    max_iters: int = 2000
    grad_tol: float | None = None
    step_mode: str = "theorem_constant"
    init: str = "spectral"
    bt_shrink: float = 0.5
    bt_growth: float = 2.0
    bt_init: float = 1.0

    def to_dict(self) -> dict:
        return {"max_iters": self.max_iters, "grad_tol": self.grad_tol,
                "step_mode": self.step_mode, "init": self.init,
                "bt_shrink": self.bt_shrink, "bt_growth": self.bt_growth,
                "bt_init": self.bt_init}

    @staticmethod
    def from_dict(d: dict) -> "SolverSettings":
        known = {"max_iters", "grad_tol", "step_mode", "init", "bt_shrink",
                 "bt_growth", "bt_init"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown solver settings: {sorted(extra)}")
        return SolverSettings(**{k: d[k] for k in known & set(d)})


@dataclass
class ExperimentConfig:
    frame: FrameSpec
    doses: list[float]
    repetitions: int
    losses: list[LossEntry]
    solver: SolverSettings = field(default_factory=SolverSettings)
    master_seed: int = DEFAULT_MASTER_SEED

    def to_dict(self) -> dict:
        return {
            "frame": self.frame.to_dict(),
            "doses": list(self.doses),
            "repetitions": self.repetitions,
            "losses": [entry.to_dict() for entry in self.losses],
            "solver": self.solver.to_dict(),
            "master_seed": self.master_seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        try:
            config = ExperimentConfig(
                frame=FrameSpec.from_dict(d["frame"]),
                doses=[float(x) for x in d["doses"]],
                repetitions=int(d["repetitions"]),
                losses=[LossEntry.from_dict(e) for e in d["losses"]],
                solver=SolverSettings.from_dict(d.get("solver", {})),
                master_seed=int(d.get("master_seed", DEFAULT_MASTER_SEED)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc
        validate_config(config)
        return config


def validate_config(config: ExperimentConfig) -> None:
    """Schema-level checks plus a dry instantiation of every loss."""
    if config.repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, "
                          f"got {config.repetitions}")
    if not config.doses:
        raise ConfigError("dose list must be nonempty")
    for d in config.doses:
        if not (d > 0 and math.isfinite(d)):
            raise ConfigError(f"doses must be positive, got {d}")
    if not config.losses:
        raise ConfigError("loss list must be nonempty")
    if config.solver.step_mode not in STEP_MODES:
        raise ConfigError(f"solver.step_mode must be one of {STEP_MODES}")
    # "given" needs an in-memory z0 and cannot come from a config file
    if config.solver.init not in ("spectral", "random"):
        raise ConfigError("solver.init must be 'spectral' or 'random'")
    if config.solver.max_iters < 1:
        raise ConfigError("solver.max_iters must be >= 1")

    dummy_frame = np.ones((1, 1), dtype=complex)
    for entry in config.losses:
        if entry.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {entry.kind!r}")
        mode = entry.step_mode or config.solver.step_mode
        if mode not in STEP_MODES:
            raise ConfigError(f"loss {entry.kind}: bad step_mode {mode!r}")
        try:
            dry = make_loss(entry.kind, dummy_frame, [1.0], **entry.params)
            if mode == "theorem_constant":
                dry.lipschitz_bound()
        except NoConstantBoundError as exc:
            raise ConfigError(
                f"loss {entry.kind}({entry.param_str()}) cannot use "
                f"step_mode 'theorem_constant': {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"bad parameters for loss {entry.kind}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(payload)


def preset_config(scale: str,
                  master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Built-in benchmark configurations.

    "ci" is a desk-scale smoke sweep; "paper" is the full low-dose study
    (n = 256, m = 2560, doses 500..4000, twenty repetitions per cell).
    """
    if scale == "ci":
        return ExperimentConfig(
            frame=FrameSpec(kind="gaussian", n=64, m=640),
            doses=[500.0, 1000.0, 2000.0, 4000.0],
            repetitions=3,
            losses=[
                LossEntry("poisson_reg", {"eps": 1e-3}),
                LossEntry("poisson_reg", {"eps": 0.25}),
                LossEntry("poisson_reg", {"eps": 1.0}),
                LossEntry("amplitude", {"eps": 1e-3}),
                LossEntry("zero_adapted", {"c1": 0.12, "c2": 0.27}),
                LossEntry("gaussian_lsq", {"sigma_sq": 0.25},
                          step_mode="backtracking"),
            ],
            solver=SolverSettings(max_iters=500),
            master_seed=master_seed,
        )
    if scale == "paper":
        return ExperimentConfig(
            frame=FrameSpec(kind="gaussian", n=256, m=2560),
            doses=[500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0, 3500.0,
                   4000.0],
            repetitions=20,
            losses=[
                LossEntry("poisson_reg", {"eps": 1e-3}),
                LossEntry("poisson_reg", {"eps": 0.1}),
                LossEntry("poisson_reg", {"eps": 0.25}),
                LossEntry("poisson_reg", {"eps": 0.5}),
                LossEntry("poisson_reg", {"eps": 1.0}),
                LossEntry("gaussian_lsq", {"sigma_sq": 0.25},
                          step_mode="backtracking"),
                LossEntry("amplitude", {"eps": 1e-3}),
                LossEntry("averaging_vst", {"c1": 0.12, "c2": 0.27}),
                LossEntry("zero_adapted", {"c1": 0.12, "c2": 0.27}),
            ],
            solver=SolverSettings(max_iters=2000),
            master_seed=master_seed,
        )
    raise ConfigError(f"unknown scale {scale!r}; expected 'ci' or 'paper'")


def derive_seed(master_seed: int, dose_index: int, rep_index: int) -> int:
    """Per-cell instance seed, stable across runs and platforms."""
    ss = np.random.SeedSequence(master_seed,
                                spawn_key=(dose_index, rep_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- simulate ---------------------------------------------------------------

def run_simulate(config: ExperimentConfig, out_dir,
                 include_truth: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for dose_idx, dose in enumerate(config.doses):
        for rep in range(config.repetitions):
            seed = derive_seed(config.master_seed, dose_idx, rep)
            inst = gen_instance(config.frame, dose, seed)
            path = out_dir / f"instance_d{dose:g}_r{rep:03d}.json"
            save_instance(inst, path, include_truth=include_truth)
            paths.append(path)
    _write_json(out_dir / "config.json", config.to_dict())
    return paths


# -- benchmark ---------------------------------------------------------------

def _solve_entry(entry: LossEntry, inst, solver: SolverSettings,
                 z0=None) -> dict:
    """Solve one (instance, loss) cell; reconstruction error is measured
    against the unit-normalized truth, so the dose scale carried by the
    counts is divided back out of the final iterate."""
    loss = make_loss(entry.kind, inst.frame, inst.counts, **entry.params)
    mode = entry.step_mode or solver.step_mode
    config = SolverConfig(
        max_iters=solver.max_iters,
        grad_tol=solver.grad_tol,
        step_mode=mode,
        bt_shrink=solver.bt_shrink,
        bt_growth=solver.bt_growth,
        bt_init=solver.bt_init,
        init_mode=solver.init if z0 is None else "given",
        z0=z0,
        seed=inst.seed,
        monitor_descent=False,
    )
    run = solve(loss, config)
    out = {
        "iterations": run.n_iters,
        "final_loss": run.final_loss,
        "final_grad_norm": run.final_grad_norm,
        "stop_reason": run.stop_reason,
    }
    if inst.x is not None:
        out["relative_error"] = relative_error(
            inst.x, run.z / math.sqrt(inst.dose))
    return out


def _benchmark_cell(args) -> list[dict]:
    config, dose_idx, rep = args
    dose = config.doses[dose_idx]
    seed = derive_seed(config.master_seed, dose_idx, rep)
    # single-threaded BLAS inside a cell: the work is matvec-bound, and
    # pinning keeps results bit-identical no matter how many workers run
    with threadpool_limits(limits=1):
        inst = gen_instance(config.frame, dose, seed)
        z0 = _cell_start(config.solver, inst)
        rows = []
        for entry in config.losses:
            row = {"loss": entry.kind, "params": entry.param_str(),
                   "dose": dose, "rep": rep, "seed": seed}
            try:
                row.update(_solve_entry(entry, inst, config.solver, z0=z0))
                row["status"] = "ok"
                row["message"] = ""
            except Exception as exc:  # a bad cell must not kill the sweep
                row["status"] = "error"
                row["message"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows


def _cell_start(solver: SolverSettings, inst):
    """One starting point per cell: every loss solves the same instance
    from the same initializer, so cross-loss comparisons are paired."""
    if solver.init == "spectral":
        return spectral_init(inst.frame, inst.counts, seed=inst.seed).z0
    if solver.init == "random":
        rng = np.random.default_rng(inst.seed)
        z0 = complex_standard_normal(rng, inst.n)
        return z0 / np.linalg.norm(z0)
    return None


def run_benchmark(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """Execute the sweep; returns per-run rows sorted by cell identity."""
    cells = [(config, dose_idx, rep)
             for dose_idx in range(len(config.doses))
             for rep in range(config.repetitions)]
    if jobs <= 1:
        results = [_benchmark_cell(cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_benchmark_cell, cells, chunksize=1))
    rows = [row for cell_rows in results for row in cell_rows]
    rows.sort(key=lambda r: (r["loss"], r["params"], r["dose"], r["rep"]))
    return rows


def benchmark_summaries(rows) -> list[RunSummary]:
    return [
        RunSummary(loss=r["loss"], params=r["params"], dose=r["dose"],
                   seed=r["seed"], relative_error=r["relative_error"],
                   iterations=r["iterations"],
                   final_grad_norm=r["final_grad_norm"],
                   stop_reason=r["stop_reason"])
        for r in rows
        if r["status"] == "ok" and "relative_error" in r
    ]


def write_runs_csv(rows, path) -> None:
    columns = ["loss", "params", "dose", "rep", "seed", "status",
               "relative_error", "iterations", "final_grad_norm",
               "stop_reason", "message"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row.get(c)) for c in columns])


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _write_json(path, payload) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# -- command implementations --------------------------------------------------

def _config_from_args(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = preset_config(args.scale)
    if args.seed is not None:
        config.master_seed = int(args.seed)
    return config


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    paths = run_simulate(config, args.out,
                         include_truth=not args.omit_truth)
    print(f"wrote {len(paths)} instances to {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    params = {}
    if args.loss in ("poisson_reg", "poisson_unbiased", "amplitude"):
        params["eps"] = args.eps
    elif args.loss == "gaussian_lsq":
        params["sigma_sq"] = args.sigma_sq
    elif args.loss == "sqrt_shift":
        params["c"] = args.c
        params["subtract_quarter"] = args.subtract_quarter
    elif args.loss in ("averaging_vst", "zero_adapted"):
        params["c1"] = args.c1
        params["c2"] = args.c2
    else:
        raise ConfigError(f"unknown loss kind {args.loss!r}")

    entry = LossEntry(args.loss, params,
                      step_mode=args.step_mode)
    settings = SolverSettings(max_iters=args.max_iters,
                              grad_tol=args.grad_tol,
                              step_mode=args.step_mode,
                              init=args.init)
    try:
        loss = make_loss(entry.kind, inst.frame, inst.counts, **entry.params)
        if args.step_mode == "theorem_constant":
            loss.lipschitz_bound()
    except (NoConstantBoundError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    config = SolverConfig(max_iters=args.max_iters, grad_tol=args.grad_tol,
                          step_mode=args.step_mode, init_mode=args.init,
                          seed=inst.seed if args.seed is None else args.seed,
                          monitor_descent=args.monitor)
    run = solve(loss, config)

    rel_err = None
    if inst.x is not None:
        rel_err = relative_error(inst.x, run.z / math.sqrt(inst.dose))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    tag = f"{stem}__{entry.kind}"
    if entry.params:
        tag += "_" + entry.param_str().replace("=", "").replace(",", "_")
    payload = {
        "format": "wirtflow-run",
        "version": 1,
        "instance": {"file": Path(args.instance).name, "n": inst.n,
                     "m": inst.m, "dose": inst.dose, "seed": inst.seed},
        "loss": entry.to_dict(),
        "solver": settings.to_dict(),
        "result": {
            "stop_reason": run.stop_reason,
            "iterations": run.n_iters,
            "final_loss": run.final_loss,
            "final_grad_norm": run.final_grad_norm,
            "step_size": run.step_size,
            "relative_error": rel_err,
            "init_fallback": run.init_fallback,
        },
        "solution": {"re": run.z.real.tolist(), "im": run.z.imag.tolist()},
    }
    run_path = out_dir / f"{tag}.run.json"
    _write_json(run_path, payload)
    if args.trace:
        trace_path = out_dir / f"{tag}.trace.csv"
        with trace_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss", "grad_norm", "step"])
            for k in range(len(run.loss_trace)):
                step = repr(float(run.step_sizes[k - 1])) if k > 0 else ""
                writer.writerow([k, repr(float(run.loss_trace[k])),
                                 repr(float(run.grad_norm_trace[k])), step])
    err_txt = "n/a" if rel_err is None else f"{rel_err:.4f}"
    print(f"{tag}: stop={run.stop_reason} iters={run.n_iters} "
          f"rel_err={err_txt} -> {run_path}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = _config_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(config, jobs=args.jobs)
    write_runs_csv(rows, out_dir / "runs.csv")
    summary_rows = aggregate(benchmark_summaries(rows))
    write_summary_csv(summary_rows, out_dir / "summary.csv")
    failures = sum(1 for r in rows if r["status"] != "ok")
    _write_json(out_dir / "metadata.json", {
        "config": config.to_dict(),
        "wirtflow_version": __version__,
        "numpy_version": np.__version__,
        "n_runs": len(rows),
        "n_failures": failures,
    })
    print(f"benchmark: {len(rows)} runs ({failures} failed), "
          f"results in {out_dir}")
    return EXIT_OK


def _parse_transforms(spec: str):
    transforms = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split(":")
        kind, extra = parts[0], [float(p) for p in parts[1:]]
        try:
            if kind == "shifted_sqrt":
                transforms.append(make_transform(kind, c=extra[0]))
            elif kind == "averaging":
                transforms.append(make_transform(kind, c1=extra[0],
                                                 c2=extra[1]))
            else:
                if extra:
                    raise ConfigError(
                        f"transform {kind!r} takes no parameters")
                transforms.append(make_transform(kind))
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"bad transform token {token!r}: {exc}") from exc
    if not transforms:
        raise ConfigError("no transforms requested")
    return transforms


def _parse_lambdas(spec: str) -> np.ndarray:
    spec = spec.strip()
    try:
        if spec.startswith("lin:") or spec.startswith("log:"):
            kind, start, stop, num = spec.split(":")
            start, stop, num = float(start), float(stop), int(num)
            if kind == "lin":
                return np.linspace(start, stop, num)
            return np.geomspace(start, stop, num)
        return np.asarray([float(tok) for tok in spec.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad lambda grid {spec!r}: {exc}") from exc


def cmd_vst(args) -> int:
    transforms = _parse_transforms(args.transforms)
    lams = _parse_lambdas(args.lambdas)
    rows = []
    for transform in transforms:
        for report in variance_curve(transform, lams):
            rows.append([transform.name, repr(report.lam),
                         repr(report.mean), repr(report.variance),
                         report.truncation_k])
    out = sys.stdout if args.out is None else \
        Path(args.out).open("w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out)
        writer.writerow(["transform", "lambda", "mean", "variance",
                         "truncation_k"])
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wirtflow",
                     description="Low-dose Poisson phase retrieval solvers "
                                 "and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate instance files")
    p_sim.add_argument("--config", help="experiment config JSON")
    p_sim.add_argument("--scale", choices=("ci", "paper"), default="ci")
    p_sim.add_argument("--seed", type=int, help="override master seed")
    p_sim.add_argument("--out", default="instances", help="output directory")
    p_sim.add_argument("--omit-truth", action="store_true",
                       help="do not store the ground-truth signal")
    p_sim.set_defaults(func=cmd_simulate)

    p_solve = sub.add_parser("solve", help="solve one instance file")
    p_solve.add_argument("--instance", required=True)
    p_solve.add_argument("--loss", required=True, choices=sorted(LOSS_KINDS))
    p_solve.add_argument("--eps", type=float, default=0.25)
    p_solve.add_argument("--c", type=float, default=0.25)
    p_solve.add_argument("--c1", type=float, default=0.12)
    p_solve.add_argument("--c2", type=float, default=0.27)
    p_solve.add_argument("--sigma-sq", type=float, default=0.25)
    p_solve.add_argument("--subtract-quarter", action="store_true")
    p_solve.add_argument("--step-mode", choices=STEP_MODES,
                         default="theorem_constant")
    p_solve.add_argument("--max-iters", type=int, default=2000)
    p_solve.add_argument("--grad-tol", type=float, default=None)
    p_solve.add_argument("--init", choices=("spectral", "random"),
                         default="spectral")
    p_solve.add_argument("--seed", type=int, default=None,
                         help="init seed (default: the instance seed)")
    p_solve.add_argument("--monitor", action="store_true",
                         help="record per-iteration descent certificates")
    p_solve.add_argument("--trace", action="store_true",
                         help="also write the iteration trace CSV")
    p_solve.add_argument("--out", default=".", help="output directory")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("benchmark", help="run a dose sweep")
    p_bench.add_argument("--config", help="experiment config JSON")
    p_bench.add_argument("--scale", choices=("ci", "paper"), default="ci")
    p_bench.add_argument("--seed", type=int, help="override master seed")
    p_bench.add_argument("--out", default="bench_out")
    p_bench.add_argument("--jobs", type=int, default=1,
                         help="worker processes")
    p_bench.set_defaults(func=cmd_benchmark)

    p_vst = sub.add_parser("vst-analyze",
                           help="variance curves of count transforms")
    p_vst.add_argument("--transforms",
                       default="sqrt,anscombe,tukey_freeman,"
                               "averaging:0.12:0.27")
    p_vst.add_argument("--lambdas", default="lin:0.05:5:100",
                       help="comma list, or lin:start:stop:num / "
                            "log:start:stop:num")
    p_vst.add_argument("--out", default=None, help="CSV path (default "
                                                   "stdout)")
    p_vst.set_defaults(func=cmd_vst)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
