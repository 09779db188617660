"""Experiment harness: scaling sweeps, trajectories, timeout families
and ensemble optimum estimates.

Every experiment is described by an Experiment value (loadable from a
key=value config) and expands into a deterministic list of runs whose
seeds derive from the experiment seed.  Results are BenchRecords; when
an output directory is given, the harness writes the instances, the
records (full and wall-clock-free "stable" variants), per-run traces
for trajectory experiments, and a manifest sufficient to re-run the
whole experiment.  Re-running a manifest with deterministic budgets
(steps, flips, machine time) regenerates the instances and the stable
records byte-for-byte; columns holding wall-clock measurements are
excluded from that guarantee because physical timing is not
reproducible.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .baseline import LsConfig, walksat
from .circuit import params_for_instance
from .formula import CnfFormula, write_dimacs
from .gen import GenSpec, generate
from .integrator import (
    IntegratorConfig,
    SolverTrace,
    StepSizeError,
    machine_time_report,
    solve,
)
from .rng import SplitMix64

KINDS = ("time_to_threshold", "trajectory", "timeout_family", "optimum_estimate")
SOLVERS = ("dmm", "walksat", "walksat_cc")

DEFAULT_SIZE_CAP = 50_000  # opt out with huge=True (hours of runtime)


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class Experiment:
    """One experiment design: what to generate, who solves it, budgets."""

    kind: str
    family: str
    n_values: tuple[int, ...]
    density: float = 5.0
    solvers: tuple[str, ...] = ("dmm",)
    threshold: float = 0.015
    repeats: int = 1
    seed: int = 0
    rhs_all_ones: bool = False
    noise: float = 0.5
    max_steps: int = 1_000_000
    max_time: float = math.inf
    max_flips: int = 10_000_000
    max_wall_s: float = math.inf
    max_dv: float = 0.1
    timeout_ks: tuple[float, ...] = ()
    timeout_unit_s: float = 1.0
    workers: int = 1
    huge: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BenchError(f"unknown experiment kind {self.kind!r}")
        if not self.n_values:
            raise BenchError("need at least one n value")
        if self.repeats < 1:
            raise BenchError("repeats must be >= 1")
        if not (0 < self.threshold <= 1):
            raise BenchError("threshold must lie in (0, 1]")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise BenchError(f"unknown solvers {unknown}; expected subset of {SOLVERS}")
        if self.kind == "timeout_family" and not self.timeout_ks:
            raise BenchError("timeout_family needs timeout_ks")
        cap = max(self.n_values)
        if cap > DEFAULT_SIZE_CAP and not self.huge:
            raise BenchError(
                f"n={cap} exceeds the default cap {DEFAULT_SIZE_CAP}; "
                "pass huge=True (--huge) for multi-hour runs"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["solvers"] = list(self.solvers)
        d["timeout_ks"] = list(self.timeout_ks)
        return d

    @staticmethod
    def from_dict(d: dict) -> "Experiment":
        d = dict(d)
        for key in ("n_values", "timeout_ks"):
            if key in d:
                d[key] = tuple(d[key])
        if "solvers" in d:
            d["solvers"] = tuple(d["solvers"])
        if d.get("max_time") is None:
            d["max_time"] = math.inf
        if d.get("max_wall_s") is None:
            d["max_wall_s"] = math.inf
        return Experiment(**d)

    @staticmethod
    def from_config(text: str) -> "Experiment":
        from .config import parse_bool, parse_int_list, parse_kv, parse_str_list

        kv = parse_kv(text)
        kwargs: dict = {
            "kind": kv["kind"],
            "family": kv["family"],
            "n_values": tuple(parse_int_list(kv["n_values"])),
        }
        floats = ("density", "threshold", "noise", "max_time", "max_wall_s",
                  "max_dv", "timeout_unit_s")
        ints = ("repeats", "seed", "max_steps", "max_flips", "workers")
        for name in floats:
            if name in kv:
                kwargs[name] = float(kv[name])
        for name in ints:
            if name in kv:
                kwargs[name] = int(kv[name])
        if "solvers" in kv:
            kwargs["solvers"] = tuple(parse_str_list(kv["solvers"]))
        if "timeout_ks" in kv:
            kwargs["timeout_ks"] = tuple(float(x) for x in kv["timeout_ks"].split(","))
        for name in ("rhs_all_ones", "huge"):
            if name in kv:
                kwargs[name] = parse_bool(kv[name])
        return Experiment(**kwargs)


@dataclass(frozen=True)
class BenchRecord:
    """Outcome of one solver run on one generated instance."""

    kind: str
    family: str
    n: int
    density: float
    seed: int
    solver: str
    status: str
    threshold: float
    num_clauses: int
    best_unsat_count: int
    best_unsat_weight: int
    best_fraction: float
    steps_to_threshold: int | None
    machine_time_to_threshold: float | None
    wall_s_to_threshold: float | None
    wall_s_total: float
    peak_mem_bytes: int
    timeout_k: float | None = None

    def sort_key(self):
        return (self.kind, self.family, self.n, self.seed, self.solver,
                -1.0 if self.timeout_k is None else self.timeout_k)


RECORD_COLUMNS = (
    "kind", "family", "n", "density", "seed", "solver", "status", "threshold",
    "num_clauses", "best_unsat_count", "best_unsat_weight", "best_fraction",
    "steps_to_threshold", "machine_time_to_threshold", "wall_s_to_threshold",
    "wall_s_total", "peak_mem_bytes", "timeout_k",
)

# Columns whose values depend on wall-clock measurement; excluded from
# the byte-reproducible "stable" CSV.
WALL_COLUMNS = ("wall_s_to_threshold", "wall_s_total")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: list[BenchRecord], stable: bool = False) -> str:
    cols = tuple(c for c in RECORD_COLUMNS if not (stable and c in WALL_COLUMNS))
    lines = [",".join(cols)]
    for rec in sorted(records, key=BenchRecord.sort_key):
        d = asdict(rec)
        lines.append(",".join(_cell(d[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _instance(exp: Experiment, n: int, inst_seed: int) -> CnfFormula:
    spec = GenSpec(family=exp.family, n=n, density=exp.density,
                   seed=inst_seed, rhs_all_ones=exp.rhs_all_ones)
    return generate(spec)


def _run_solver(formula: CnfFormula, solver: str, run_seed: int,
                exp: Experiment, wall_budget: float) -> tuple[str, SolverTrace]:
    if solver == "dmm":
        cfg = IntegratorConfig(
            threshold=exp.threshold,
            max_steps=exp.max_steps,
            max_time=exp.max_time,
            max_wall_s=wall_budget,
            max_dv=exp.max_dv,
        )
        params = params_for_instance(exp.family, exp.density)
        try:
            res = solve(formula, params, cfg, seed=run_seed)
        except StepSizeError as err:
            trace = SolverTrace(samples=[], best_assignment=np.zeros(0, bool),
                                num_clauses=formula.num_clauses,
                                threshold=exp.threshold, solver="dmm",
                                stats={"error": str(err), "wall_s": 0.0,
                                       "memory_bytes": 0})
            return "failed", trace
        return res.status, res.trace
    cfg = LsConfig(
        noise=exp.noise,
        max_flips=exp.max_flips,
        max_wall_s=wall_budget,
        cc_enabled=solver == "walksat_cc",
        seed=run_seed,
        threshold=exp.threshold,
    )
    _, trace = walksat(formula, cfg)
    report = machine_time_report(trace)
    return ("threshold_met" if report.met else "timeout"), trace


def _record_for(exp: Experiment, n: int, inst_seed: int, solver: str,
                status: str, trace: SolverTrace,
                timeout_k: float | None = None) -> BenchRecord:
    if status == "failed" or not trace.samples:
        return BenchRecord(
            kind=exp.kind, family=exp.family, n=n, density=exp.density,
            seed=inst_seed, solver=solver, status=status,
            threshold=exp.threshold, num_clauses=trace.num_clauses,
            best_unsat_count=-1, best_unsat_weight=-1, best_fraction=math.nan,
            steps_to_threshold=None, machine_time_to_threshold=None,
            wall_s_to_threshold=None,
            wall_s_total=float(trace.stats.get("wall_s", 0.0)),
            peak_mem_bytes=int(trace.stats.get("memory_bytes", 0)),
            timeout_k=timeout_k,
        )
    report = machine_time_report(trace)
    return BenchRecord(
        kind=exp.kind, family=exp.family, n=n, density=exp.density,
        seed=inst_seed, solver=solver, status=status,
        threshold=exp.threshold, num_clauses=trace.num_clauses,
        best_unsat_count=trace.best_unsat_count,
        best_unsat_weight=trace.best_unsat_weight,
        best_fraction=trace.best_fraction,
        steps_to_threshold=report.steps if report.met else None,
        machine_time_to_threshold=report.machine_time if report.met else None,
        wall_s_to_threshold=report.wall_s if report.met else None,
        wall_s_total=float(trace.stats.get("wall_s", 0.0)),
        peak_mem_bytes=int(trace.stats.get("memory_bytes", 0)),
        timeout_k=timeout_k,
    )


@dataclass(frozen=True)
class _Task:
    n: int
    repeat: int
    inst_seed: int
    solver: str
    run_seed: int
    timeout_k: float | None


def _expand_tasks(exp: Experiment) -> list[_Task]:
    stream = SplitMix64(exp.seed)
    tasks = []
    for n in exp.n_values:
        for repeat in range(exp.repeats):
            inst_seed = stream.next_u64()
            for solver in exp.solvers:
                run_seed = stream.next_u64()
                if exp.kind == "timeout_family":
                    for k in exp.timeout_ks:
                        tasks.append(_Task(n, repeat, inst_seed, solver, run_seed, k))
                else:
                    tasks.append(_Task(n, repeat, inst_seed, solver, run_seed, None))
    return tasks


def _run_task(args):
    exp, task = args
    formula = _instance(exp, task.n, task.inst_seed)
    if task.timeout_k is not None:
        wall_budget = task.timeout_k * task.n * exp.timeout_unit_s
    else:
        wall_budget = exp.max_wall_s
    status, trace = _run_solver(formula, task.solver, task.run_seed, exp, wall_budget)
    record = _record_for(exp, task.n, task.inst_seed, task.solver, status, trace,
                         task.timeout_k)
    return task, record, trace


def run_experiment(exp: Experiment, out_dir: str | None = None) -> list[BenchRecord]:
    """Run every (instance, solver) pair of the experiment.

    Solver failures are recorded per run and never abort the sweep.
    With an output directory, instances, records, traces (for
    trajectory experiments) and the manifest are written as results
    complete.
    """
    tasks = _expand_tasks(exp)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "instances"), exist_ok=True)
        if exp.kind == "trajectory":
            os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
        write_manifest(exp, os.path.join(out_dir, "manifest.json"))
        written_instances: set[tuple[int, int]] = set()

    records = []
    stream_path = os.path.join(out_dir, "records.log") if out_dir else None
    stream_fh = open(stream_path, "w", encoding="ascii") if stream_path else None
    try:
        if exp.workers > 1:
            with ProcessPoolExecutor(max_workers=exp.workers) as pool:
                outcomes = list(pool.map(_run_task, [(exp, t) for t in tasks]))
        else:
            outcomes = [_run_task((exp, t)) for t in tasks]
        for task, record, trace in outcomes:
            records.append(record)
            if stream_fh:
                stream_fh.write(json.dumps(asdict(record)) + "\n")
                stream_fh.flush()
            if out_dir:
                key = (task.n, task.repeat)
                if key not in written_instances:
                    written_instances.add(key)
                    formula = _instance(exp, task.n, task.inst_seed)
                    name = f"{exp.family}_n{task.n}_r{task.repeat}.cnf"
                    with open(os.path.join(out_dir, "instances", name), "w",
                              encoding="ascii") as fh:
                        fh.write(write_dimacs(formula))
                if exp.kind == "trajectory" and trace.samples:
                    name = f"{task.solver}_{exp.family}_n{task.n}_r{task.repeat}.csv"
                    trace.write_csv(os.path.join(out_dir, "traces", name))
    finally:
        if stream_fh:
            stream_fh.close()

    records.sort(key=BenchRecord.sort_key)
    if out_dir:
        with open(os.path.join(out_dir, "records.csv"), "w", encoding="ascii") as fh:
            fh.write(records_to_csv(records))
        with open(os.path.join(out_dir, "records_stable.csv"), "w", encoding="ascii") as fh:
            fh.write(records_to_csv(records, stable=True))
    return records


def read_records_csv(path: str) -> list[BenchRecord]:
    """Load records written by run_experiment (full or stable layout)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        unknown = [c for c in header if c not in RECORD_COLUMNS]
        if unknown:
            raise BenchError(f"{path}: unknown columns {unknown}")
        records = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            row = dict(zip(header, cells))

            def _get(col, conv, default=None):
                raw = row.get(col, "")
                return conv(raw) if raw != "" else default

            records.append(BenchRecord(
                kind=_get("kind", str, "time_to_threshold"),
                family=_get("family", str, ""),
                n=_get("n", int, 0),
                density=_get("density", float, 0.0),
                seed=_get("seed", int, 0),
                solver=_get("solver", str, ""),
                status=_get("status", str, ""),
                threshold=_get("threshold", float, 0.0),
                num_clauses=_get("num_clauses", int, 0),
                best_unsat_count=_get("best_unsat_count", int, -1),
                best_unsat_weight=_get("best_unsat_weight", int, -1),
                best_fraction=_get("best_fraction", float, math.nan),
                steps_to_threshold=_get("steps_to_threshold", int),
                machine_time_to_threshold=_get("machine_time_to_threshold", float),
                wall_s_to_threshold=_get("wall_s_to_threshold", float),
                wall_s_total=_get("wall_s_total", float, 0.0),
                peak_mem_bytes=_get("peak_mem_bytes", int, 0),
                timeout_k=_get("timeout_k", float),
            ))
    return records


def write_manifest(exp: Experiment, path: str) -> None:
    payload = {
        "tool": "memsat",
        "version": __version__,
        "experiment": exp.to_dict(),
    }

    def _clean(obj):
        if isinstance(obj, float) and math.isinf(obj):
            return None
        if isinstance(obj, dict):
            return {k: _clean(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [_clean(v) for v in obj]
        return obj

    with open(path, "w", encoding="ascii") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str) -> Experiment:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    if payload.get("tool") != "memsat":
        raise BenchError(f"{path} is not a memsat manifest")
    return Experiment.from_dict(payload["experiment"])


def estimate_optimum(family: str, n: int = 300, density: float = 5.0,
                     ensemble: int = 10, seed: int = 0,
                     cfg: IntegratorConfig | None = None,
                     rhs_all_ones: bool = False,
                     audit_sink: list | None = None) -> tuple[float, float]:
    """Ensemble estimate of the reachable optimum for one family.

    Generates `ensemble` instances, runs the circuit solver with a
    generous budget on each, and returns mean and standard deviation of
    the best unsatisfied-clause fractions.
    """
    if cfg is None:
        cfg = IntegratorConfig(threshold=0.0, max_steps=300_000, max_time=1e9,
                               max_dv=0.3)
    params = params_for_instance(family, density)
    stream = SplitMix64(seed)
    fractions = []
    for _ in range(ensemble):
        inst_seed = stream.next_u64()
        run_seed = stream.next_u64()
        spec = GenSpec(family=family, n=n, density=density, seed=inst_seed,
                       rhs_all_ones=rhs_all_ones)
        formula = generate(spec)
        res = solve(formula, params, cfg, seed=run_seed)
        fractions.append(res.trace.best_fraction)
        if audit_sink is not None:
            audit_sink.append(res.trace.stats)
    arr = np.asarray(fractions)
    return float(arr.mean()), float(arr.std())


@dataclass(frozen=True)
class ScalingFit:
    """Regression of time-to-threshold against instance size.

    The exponential model fits log10(time) linearly in n (the paper's
    construction for extrapolating local-search blowup); the linear
    model fits time itself.
    """

    solver: str
    count: int
    distinct_n: int
    exp_slope: float
    exp_intercept: float
    exp_r2: float
    lin_slope: float
    lin_intercept: float
    lin_r2: float

    def exp_time_at(self, n: float) -> float:
        return 10.0 ** (self.exp_intercept + self.exp_slope * n)

    def lin_time_at(self, n: float) -> float:
        return self.lin_intercept + self.lin_slope * n


def _r2(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def _record_time(rec: BenchRecord, field_name: str) -> float | None:
    return {
        "wall": rec.wall_s_to_threshold,
        "machine": rec.machine_time_to_threshold,
        "steps": rec.steps_to_threshold,
    }[field_name]


def fit_scaling(records: list[BenchRecord],
                time_field: str = "wall") -> dict[str, ScalingFit | None]:
    """Per-solver regressions over threshold-met records.

    Solvers with fewer than three distinct n values map to None (not
    enough data to fit a scaling law).
    """
    if time_field not in ("wall", "machine", "steps"):
        raise BenchError(f"unknown time field {time_field!r}")
    by_solver: dict[str, list[tuple[int, float]]] = {}
    for rec in records:
        if rec.status != "threshold_met":
            continue
        t = _record_time(rec, time_field)
        if t is None:
            continue
        by_solver.setdefault(rec.solver, []).append((rec.n, max(float(t), 1e-9)))

    fits: dict[str, ScalingFit | None] = {}
    for solver, points in by_solver.items():
        ns = np.array([p[0] for p in points], dtype=float)
        ts = np.array([p[1] for p in points], dtype=float)
        distinct = len(set(ns.tolist()))
        if distinct < 3:
            fits[solver] = None
            continue
        exp_slope, exp_icpt = np.polyfit(ns, np.log10(ts), 1)
        lin_slope, lin_icpt = np.polyfit(ns, ts, 1)
        fits[solver] = ScalingFit(
            solver=solver,
            count=len(points),
            distinct_n=distinct,
            exp_slope=float(exp_slope),
            exp_intercept=float(exp_icpt),
            exp_r2=_r2(np.log10(ts), exp_icpt + exp_slope * ns),
            lin_slope=float(lin_slope),
            lin_intercept=float(lin_icpt),
            lin_r2=_r2(ts, lin_icpt + lin_slope * ns),
        )
    return fits
