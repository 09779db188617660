"""Static SVG charts for experiment results.

Four styles cover the harness outputs: time-to-threshold versus size
(log-y, with optional dashed extrapolations from fitted scaling laws),
best unsat fraction versus wall time normalized by n, best unsat
fraction versus machine time, and unsat fraction versus size for
families of timeouts.  Every chart gets a sibling CSV holding exactly
the plotted series.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import BenchRecord, ScalingFit
from .integrator import SolverTrace


class ChartError(ValueError):
    pass


_STYLE = {
    "dmm": dict(color="tab:blue", marker="o"),
    "walksat": dict(color="tab:red", marker="s"),
    "walksat_cc": dict(color="tab:green", marker="^"),
}


def _style(solver: str) -> dict:
    return _STYLE.get(solver, dict(marker="x"))


@dataclass(frozen=True)
class TraceSeries:
    """One trajectory to plot: a labelled trace plus its instance size."""

    label: str
    n: int
    trace: SolverTrace


def _write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v))
                              for v in row) + "\n")


def chart_time_to_threshold(records: list[BenchRecord], out_base: str,
                            fits: dict[str, ScalingFit | None] | None = None,
                            extrapolate_to: int | None = None) -> list[str]:
    """Median time-to-threshold vs n per solver, log-scaled time axis.

    When fits are provided, the exponential model for each solver is
    drawn dashed out to extrapolate_to (default: the largest n of any
    solver's data), mirroring the estimated-time construction used to
    project local-search blowup.
    """
    met = [r for r in records if r.status == "threshold_met"
           and r.wall_s_to_threshold is not None]
    if not met:
        raise ChartError("no threshold-met records to plot")
    series: dict[str, dict[int, list[float]]] = {}
    for rec in met:
        series.setdefault(rec.solver, {}).setdefault(rec.n, []).append(
            rec.wall_s_to_threshold)

    import numpy as np

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    rows = []
    for solver, by_n in sorted(series.items()):
        ns = sorted(by_n)
        med = [float(np.median(by_n[n])) for n in ns]
        ax.plot(ns, med, label=solver, **_style(solver))
        rows.extend((solver, n, m, "measured") for n, m in zip(ns, med))
        fit = (fits or {}).get(solver)
        if fit is not None and extrapolate_to:
            xs = np.linspace(min(ns), extrapolate_to, 64)
            ys = [fit.exp_time_at(x) for x in xs]
            ax.plot(xs, ys, linestyle="--", color=_style(solver).get("color"),
                    alpha=0.7, label=f"{solver} (estimated)")
            rows.extend((solver, float(x), float(y), "estimated")
                        for x, y in zip(xs, ys))
    ax.set_yscale("log")
    ax.set_xlabel("variables n")
    ax.set_ylabel("wall time to threshold [s]")
    ax.set_title("Time to reach the unsat-fraction threshold")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    svg = out_base + ".svg"
    fig.savefig(svg)
    plt.close(fig)
    csv = out_base + ".csv"
    _write_csv(csv, ["solver", "n", "wall_s", "kind"], rows)
    return [svg, csv]


def _plot_traces(series: list[TraceSeries], out_base: str, x_of, xlabel: str,
                 title: str, logx: bool = True) -> list[str]:
    if not series:
        raise ChartError("no traces to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    rows = []
    for item in series:
        xs, ys = [], []
        for s in item.trace.samples:
            x = x_of(item, s)
            if logx and x <= 0:
                continue
            xs.append(x)
            ys.append(100.0 * s.best_unsat_count / item.trace.num_clauses)
        ax.plot(xs, ys, label=item.label)
        rows.extend((item.label, x, y) for x, y in zip(xs, ys))
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("unsatisfied clauses [%]")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    svg = out_base + ".svg"
    fig.savefig(svg)
    plt.close(fig)
    csv = out_base + ".csv"
    _write_csv(csv, ["series", "x", "unsat_percent"], rows)
    return [svg, csv]


def chart_normalized_time(series: list[TraceSeries], out_base: str) -> list[str]:
    """Best unsat percentage vs wall time / n."""
    return _plot_traces(series, out_base,
                        lambda item, s: s.wall_s / item.n,
                        "wall time / n [s]",
                        "Relaxation vs size-normalized time")


def chart_machine_time(series: list[TraceSeries], out_base: str) -> list[str]:
    """Best unsat percentage vs machine (simulated) time."""
    return _plot_traces(series, out_base,
                        lambda item, s: s.machine_time,
                        "machine time",
                        "Relaxation vs machine time")


def chart_timeout_family(records: list[BenchRecord], out_base: str) -> list[str]:
    """Best unsat percentage vs n, one curve per (solver, timeout k)."""
    recs = [r for r in records if r.timeout_k is not None]
    if not recs:
        raise ChartError("no timeout-family records to plot")

    import numpy as np

    groups: dict[tuple[str, float], dict[int, list[float]]] = {}
    for rec in recs:
        groups.setdefault((rec.solver, rec.timeout_k), {}).setdefault(
            rec.n, []).append(rec.best_fraction)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    rows = []
    for (solver, k), by_n in sorted(groups.items()):
        ns = sorted(by_n)
        med = [100.0 * float(np.median(by_n[n])) for n in ns]
        ax.plot(ns, med, marker="o", label=f"{solver} k={k:g}")
        rows.extend((solver, k, n, m) for n, m in zip(ns, med))
    ax.set_xlabel("variables n")
    ax.set_ylabel("unsatisfied clauses [%]")
    ax.set_title("Quality under timeouts t_out = k*n")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    svg = out_base + ".svg"
    fig.savefig(svg)
    plt.close(fig)
    csv = out_base + ".csv"
    _write_csv(csv, ["solver", "k", "n", "unsat_percent"], rows)
    return [svg, csv]


def emit_charts(records: list[BenchRecord] | None = None,
                traces: list[TraceSeries] | None = None,
                out_dir: str = ".",
                fits: dict[str, ScalingFit | None] | None = None,
                extrapolate_to: int | None = None) -> list[str]:
    """Render every chart the given inputs support.

    Raises ChartError before creating any file when there is nothing to
    plot; otherwise returns the list of written paths (SVGs plus their
    data CSVs).
    """
    has_threshold = bool(records) and any(
        r.status == "threshold_met" and r.wall_s_to_threshold is not None
        for r in records)
    has_timeout = bool(records) and any(r.timeout_k is not None for r in records)
    if not (has_threshold or has_timeout or traces):
        raise ChartError("no records or traces to chart")
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    if has_threshold:
        written += chart_time_to_threshold(
            records, os.path.join(out_dir, "time_to_threshold"),
            fits=fits, extrapolate_to=extrapolate_to)
    if has_timeout:
        written += chart_timeout_family(
            records, os.path.join(out_dir, "timeout_family"))
    if traces:
        written += chart_normalized_time(
            traces, os.path.join(out_dir, "unsat_vs_normalized_time"))
        written += chart_machine_time(
            traces, os.path.join(out_dir, "unsat_vs_machine_time"))
    return written


def load_trace_csv(path: str, num_clauses: int | None = None) -> SolverTrace:
    """Rebuild a plottable trace from its CSV export.

    The clause count is recovered from the unsat fraction column unless
    given explicitly (fraction = count / M).
    """
    from .integrator import TraceSample

    samples = []
    m = num_clauses
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["machine_time", "steps", "wall_s"]:
            raise ChartError(f"{path}: not a trace CSV")
        for line in fh:
            mt, steps, wall, count, frac = line.strip().split(",")
            count_i = int(count)
            if m is None and count_i > 0:
                m = round(count_i / float(frac))
            samples.append(TraceSample(float(mt), int(steps), float(wall),
                                       count_i, count_i))
    if m is None:
        raise ChartError(f"{path}: cannot infer clause count from an all-zero trace")
    import numpy as np

    return SolverTrace(samples=samples, best_assignment=np.zeros(0, bool),
                       num_clauses=m, threshold=0.0, solver="loaded")
