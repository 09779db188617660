"""Command-line front end.

Subcommands: generate | solve | compare | bench | charts.  Instances
are DIMACS CNF/WCNF files (or the "p xor" format for raw XOR systems);
experiment configs are key=value files; charts are SVG files rendered
next to their data CSVs.
"""

from __future__ import annotations

import argparse
import re
import sys

from .baseline import LsConfig, walksat
from .bench import (
    DEFAULT_SIZE_CAP,
    Experiment,
    estimate_optimum,
    fit_scaling,
    load_manifest,
    read_records_csv,
    run_experiment,
)
from .circuit import DmmParams, params_for_instance
from .formula import parse_dimacs, write_dimacs
from .gen import GenSpec, gen_delta_xorsat, gen_xorsat, generate, write_xor
from .integrator import IntegratorConfig, machine_time_report, solve


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _add_genspec_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--family", required=required,
                   choices=("random_e3sat", "hyper_e3sat", "delta_e3sat", "xorsat"))
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--density", type=float, required=required,
                   help="clauses per variable (XOR equations per variable for xorsat)")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--rhs-ones", action="store_true",
                   help="force every XOR right-hand side to 1 instead of a fair coin")


def _genspec_from_args(args) -> GenSpec:
    return GenSpec(family=args.family, n=args.n, density=args.density,
                   seed=args.gen_seed, rhs_all_ones=args.rhs_ones)


def _load_instance(args):
    if args.instance:
        return parse_dimacs(_read(args.instance))
    if not args.family:
        raise SystemExit("give an instance path or --family/--n/--density")
    return generate(_genspec_from_args(args))


def _cmd_generate(args) -> int:
    if args.n > DEFAULT_SIZE_CAP and not args.huge:
        raise SystemExit(f"n={args.n} exceeds {DEFAULT_SIZE_CAP}; pass --huge to allow")
    spec = _genspec_from_args(args)
    if args.xor:
        if spec.family == "delta_e3sat":
            text = write_xor(gen_delta_xorsat(spec))
        elif spec.family in ("xorsat", "hyper_e3sat"):
            text = write_xor(gen_xorsat(spec))
        else:
            raise SystemExit("--xor requires an XOR-backed family")
    else:
        text = write_dimacs(generate(spec))
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _integrator_cfg(args) -> IntegratorConfig:
    kwargs = {}
    if args.config:
        return IntegratorConfig.from_config(_read(args.config))
    kwargs["threshold"] = args.threshold
    kwargs["max_steps"] = args.max_steps
    if args.max_time is not None:
        kwargs["max_time"] = args.max_time
    if args.max_wall is not None:
        kwargs["max_wall_s"] = args.max_wall
    if args.method:
        kwargs["method"] = args.method
    return IntegratorConfig(**kwargs)


def _run_one(formula, solver: str, args):
    if solver == "dmm":
        if args.params:
            params = DmmParams.from_config(_read(args.params))
        else:
            params = params_for_instance(args.family, args.density)
        res = solve(formula, params, _integrator_cfg(args), seed=args.seed)
        return res.status, res.trace
    cfg = LsConfig(noise=args.noise, max_flips=args.max_flips,
                   max_wall_s=args.max_wall if args.max_wall else float("inf"),
                   cc_enabled=solver == "walksat_cc", seed=args.seed,
                   threshold=args.threshold)
    _, trace = walksat(formula, cfg)
    report = machine_time_report(trace)
    return ("threshold_met" if report.met else "timeout"), trace


def _print_outcome(solver: str, status: str, trace) -> None:
    report = machine_time_report(trace)
    print(f"solver={solver} status={status} "
          f"best_unsat={trace.best_unsat_count} "
          f"best_weight={trace.best_unsat_weight} "
          f"fraction={trace.best_fraction:.6f}")
    if report.met:
        print(f"  to_threshold: steps={report.steps} "
              f"machine_time={report.machine_time:.6g} wall_s={report.wall_s:.3f}")
    wall = trace.stats.get("wall_s", 0.0)
    print(f"  total: wall_s={wall:.3f} memory_bytes={trace.stats.get('memory_bytes', 0)}")


def _cmd_solve(args) -> int:
    formula = _load_instance(args)
    status, trace = _run_one(formula, args.solver, args)
    _print_outcome(args.solver, status, trace)
    if args.trace:
        trace.write_csv(args.trace)
        print(f"wrote {args.trace}")
    if args.model:
        bits = "".join("1" if b else "0" for b in trace.best_assignment)
        print(f"v {bits}")
    return 0


def _cmd_compare(args) -> int:
    formula = _load_instance(args)
    for solver in args.solvers.split(","):
        solver = solver.strip()
        status, trace = _run_one(formula, solver, args)
        _print_outcome(solver, status, trace)
    return 0


def _cmd_bench(args) -> int:
    if args.manifest:
        exp = load_manifest(args.manifest)
    elif args.config:
        exp = Experiment.from_config(_read(args.config))
    else:
        raise SystemExit("bench needs --config or --manifest")
    if args.workers:
        exp = Experiment.from_dict({**exp.to_dict(), "workers": args.workers})
    if args.huge:
        exp = Experiment.from_dict({**exp.to_dict(), "huge": True})
    records = run_experiment(exp, out_dir=args.out)
    met = sum(1 for r in records if r.status == "threshold_met")
    print(f"{len(records)} records ({met} threshold_met) -> {args.out}")
    if exp.kind == "time_to_threshold":
        for solver, fit in fit_scaling(records).items():
            if fit is None:
                print(f"  {solver}: not enough distinct sizes for a fit")
            else:
                print(f"  {solver}: log10(t)~{fit.exp_slope:.3g}*n+{fit.exp_intercept:.3g} "
                      f"(R2={fit.exp_r2:.3f}); t~{fit.lin_slope:.3g}*n+{fit.lin_intercept:.3g} "
                      f"(R2={fit.lin_r2:.3f})")
    return 0


def _cmd_estimate(args) -> int:
    cfg = None
    if args.max_steps or args.max_time:
        cfg = IntegratorConfig(
            threshold=0.0,
            max_steps=args.max_steps or 400_000,
            max_time=args.max_time or 1000.0,
        )
    mean, std = estimate_optimum(args.family, n=args.n, density=args.density,
                                 ensemble=args.ensemble, seed=args.gen_seed,
                                 cfg=cfg, rhs_all_ones=args.rhs_ones)
    print(f"family={args.family} n={args.n} density={args.density:g} "
          f"ensemble={args.ensemble}")
    print(f"best unsat fraction: mean={mean:.6f} ({100*mean:.3f}%) std={std:.6f}")
    return 0


_TRACE_NAME = re.compile(r"^(?P<solver>[a-z_]+)_(?P<family>[a-z0-9_]+)_n(?P<n>\d+)_r(?P<rep>\d+)\.csv$")


def _cmd_charts(args) -> int:
    from .charts import TraceSeries, emit_charts, load_trace_csv

    records = read_records_csv(args.records) if args.records else None
    traces = None
    if args.traces_dir:
        import os

        traces = []
        for name in sorted(os.listdir(args.traces_dir)):
            m = _TRACE_NAME.match(name)
            if not m:
                continue
            trace = load_trace_csv(os.path.join(args.traces_dir, name))
            label = f"{m['solver']} n={m['n']}"
            traces.append(TraceSeries(label=label, n=int(m["n"]), trace=trace))
    fits = None
    if records and args.extrapolate:
        fits = fit_scaling(records)
    written = emit_charts(records=records, traces=traces, out_dir=args.out,
                          fits=fits, extrapolate_to=args.extrapolate)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memsat",
        description="Max-SAT via simulated self-organizing logic circuits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a benchmark instance")
    _add_genspec_args(p, required=True)
    p.add_argument("--xor", action="store_true", help="emit the XOR system, not CNF")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--huge", action="store_true",
                   help="allow n beyond the default CI cap")
    p.set_defaults(func=_cmd_generate)

    def _solver_args(p, multi=False):
        p.add_argument("instance", nargs="?", help="DIMACS CNF/WCNF path")
        _add_genspec_args(p, required=False)
        if multi:
            p.add_argument("--solvers", default="dmm,walksat")
        else:
            p.add_argument("--solver", default="dmm",
                           choices=("dmm", "walksat", "walksat_cc"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threshold", type=float, default=0.0,
                       help="stop at this best unsat fraction")
        p.add_argument("--max-steps", type=int, default=1_000_000)
        p.add_argument("--max-time", type=float, default=None,
                       help="machine-time budget for the circuit solver")
        p.add_argument("--max-flips", type=int, default=10_000_000)
        p.add_argument("--max-wall", type=float, default=None)
        p.add_argument("--noise", type=float, default=0.5)
        p.add_argument("--method", choices=("euler", "heun"), default=None)
        p.add_argument("--params", help="gate-parameter key=value file")
        p.add_argument("--config", help="integrator key=value file")
        p.add_argument("--trace", help="write the best-so-far trace CSV here")

    p = sub.add_parser("solve", help="run one solver on one instance")
    _solver_args(p)
    p.add_argument("--model", action="store_true", help="print the best assignment bits")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("compare", help="run several solvers on one instance")
    _solver_args(p, multi=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("bench", help="run an experiment config or manifest")
    p.add_argument("--config", help="experiment key=value file")
    p.add_argument("--manifest", help="manifest.json from a previous run")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--huge", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("estimate", help="ensemble optimum estimate for a family")
    _add_genspec_args(p, required=True)
    p.add_argument("--ensemble", type=int, default=10)
    p.add_argument("--max-steps", type=int, default=0)
    p.add_argument("--max-time", type=float, default=0)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("charts", help="render SVG charts from results")
    p.add_argument("--records", help="records.csv from bench")
    p.add_argument("--traces-dir", help="directory of trace CSVs from bench")
    p.add_argument("--out", required=True)
    p.add_argument("--extrapolate", type=int, default=None,
                   help="extend fitted scaling laws out to this n (dashed)")
    p.set_defaults(func=_cmd_charts)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
