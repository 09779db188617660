"""Step-size-controlled forward integration of the circuit flow.

The integrator is plain forward Euler with one control: if a proposed
step would move any voltage by more than max_dv, the step size shrinks
and the proposal is retried; accepted steps grow the step size back
toward dt_max.  After every accepted step the state is clamped to its
boxes and the readout assignment is scored, so the best configuration
seen anywhere along the trajectory is retained even when the dynamics
keeps moving (on unsatisfiable inputs there is no equilibrium).

An optional Heun (trapezoidal predictor-corrector) variant sits behind
IntegratorConfig.method; Euler is the default because equilibrium
location, not trajectory accuracy, is what matters here and Euler
maximizes steps per second.

Traces sample geometrically in step count (powers of 1.2) plus every
best-so-far improvement, keeping them logarithmic in run length.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .circuit import (
    Circuit,
    DmmParams,
    DmmState,
    build_circuit,
    clamp_state,
    flow_field,
    init_state,
    readout,
)
from .formula import CnfFormula

EQUILIBRIUM_TOL = 1e-6

_RUNNING, _THRESHOLD, _EQUILIBRIUM, _TIME_BUDGET, _DT_UNDERFLOW, _NONFINITE = range(6)


class IntegratorError(ValueError):
    """Invalid integrator configuration."""


class StepSizeError(RuntimeError):
    """Voltage change exceeded max_dv even at the minimum step size."""

    def __init__(self, step: int, t: float, max_rate: float, dt_min: float):
        super().__init__(
            f"step {step} (t={t:.6g}): |dv/dt|={max_rate:.6g} needs dt below "
            f"dt_min={dt_min:.3g} to respect the voltage-change cap"
        )
        self.step = step
        self.t = t
        self.max_rate = max_rate


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control bounds plus the stopping rule."""

    dt_init: float = 2.0**-7
    dt_min: float = 2.0**-15
    dt_max: float = 1.0
    max_dv: float = 0.1
    grow: float = 1.25
    shrink: float = 0.5
    threshold: float = 0.0          # stop when best unsat fraction <= this
    max_time: float = math.inf      # machine-time budget
    max_wall_s: float = math.inf
    max_steps: int = 10_000_000
    method: str = "euler"
    chunk_steps: int = 1024

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise IntegratorError("need 0 < dt_min <= dt_init <= dt_max")
        if not (0 < self.max_dv < 2):
            raise IntegratorError("max_dv must lie in (0, 2)")
        if self.grow <= 1 or not (0 < self.shrink < 1):
            raise IntegratorError("need grow > 1 and 0 < shrink < 1")
        if not (0 <= self.threshold <= 1):
            raise IntegratorError("threshold is an unsat fraction in [0, 1]")
        if self.method not in ("euler", "heun"):
            raise IntegratorError(f"unknown method {self.method!r}")
        if self.max_steps < 0 or self.chunk_steps < 1:
            raise IntegratorError("step budgets must be positive")

    @staticmethod
    def from_config(text: str) -> "IntegratorConfig":
        from .config import parse_kv

        kv = parse_kv(text)
        kwargs: dict = {}
        for name in ("dt_init", "dt_min", "dt_max", "max_dv", "grow", "shrink",
                     "threshold", "max_time", "max_wall_s"):
            if name in kv:
                kwargs[name] = float(kv[name])
        for name in ("max_steps", "chunk_steps"):
            if name in kv:
                kwargs[name] = int(kv[name])
        if "method" in kv:
            kwargs["method"] = kv["method"]
        return IntegratorConfig(**kwargs)


@dataclass(frozen=True)
class TraceSample:
    machine_time: float
    steps: int
    wall_s: float
    best_unsat_count: int
    best_unsat_weight: int


@dataclass
class SolverTrace:
    """Best-so-far time series of one solver run (any solver)."""

    samples: list[TraceSample]
    best_assignment: np.ndarray
    num_clauses: int
    threshold: float
    solver: str = "dmm"
    stats: dict = field(default_factory=dict)

    @property
    def best_unsat_count(self) -> int:
        return self.samples[-1].best_unsat_count

    @property
    def best_unsat_weight(self) -> int:
        return self.samples[-1].best_unsat_weight

    @property
    def best_fraction(self) -> float:
        return self.best_unsat_count / self.num_clauses

    def to_csv(self) -> str:
        lines = ["machine_time,steps,wall_s,unsat_count,unsat_frac"]
        for s in self.samples:
            frac = s.best_unsat_count / self.num_clauses
            lines.append(
                f"{s.machine_time!r},{s.steps},{s.wall_s:.6f},{s.best_unsat_count},{frac!r}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_csv())


@dataclass(frozen=True)
class ThresholdReport:
    """When a trace first met the unsat-fraction threshold, if ever."""

    met: bool
    steps: int | None = None
    machine_time: float | None = None
    wall_s: float | None = None


def machine_time_report(trace: SolverTrace, threshold: float | None = None) -> ThresholdReport:
    """First trace sample meeting the threshold (default: the trace's own)."""
    if not trace.samples:
        raise IntegratorError("empty trace")
    theta = trace.threshold if threshold is None else threshold
    for s in trace.samples:
        if s.best_unsat_count <= theta * trace.num_clauses:
            return ThresholdReport(True, s.steps, s.machine_time, s.wall_s)
    return ThresholdReport(False)


@dataclass(frozen=True)
class SolveResult:
    assignment: np.ndarray
    trace: SolverTrace
    status: str  # threshold_met | equilibrium | timeout


@njit(cache=True)
def _eval_state(v, xs, xl, clause_ptr, lit_var, lit_sign, drive, raw_weight,
                alpha, beta, gamma, delta, eps, zeta, dv, dxs, dxl, out):
    """Flow field plus readout scoring in one sweep.

    out[0] <- max |dv|, out[1] <- max C_m, out[2] <- unsat clause count,
    out[3] <- unsat weight.  Returns -1 or the first non-finite gate.
    """
    num_clauses = clause_ptr.shape[0] - 1
    for i in range(dv.shape[0]):
        dv[i] = 0.0
    max_c = 0.0
    unsat_count = 0
    unsat_weight = 0
    bad = -1
    for m in range(num_clauses):
        b = clause_ptr[m]
        e = clause_ptr[m + 1]
        min1 = 1.0e308
        arg = -1
        argvar = 2147483647
        satisfied = False
        for j in range(b, e):
            i = lit_var[j]
            q = lit_sign[j]
            h = 0.5 * (1.0 - q * v[i])
            if h < min1 or (h == min1 and i < argvar):
                min1 = h
                arg = j
                argvar = i
            if (q > 0.0 and v[i] >= 0.0) or (q < 0.0 and v[i] < 0.0):
                satisfied = True
        min2 = 1.0
        for j in range(b, e):
            if j == arg:
                continue
            h = 0.5 * (1.0 - lit_sign[j] * v[lit_var[j]])
            if h < min2:
                min2 = h

        if not satisfied:
            unsat_count += 1
            unsat_weight += raw_weight[m]
        c_m = min1
        if c_m > max_c:
            max_c = c_m
        dxs[m] = beta * (xs[m] + eps) * (c_m - gamma)
        dxl[m] = alpha * (c_m - delta)
        g_scale = drive[m] * xl[m] * xs[m]
        r_scale = drive[m] * (1.0 + zeta * xl[m]) * (1.0 - xs[m])
        ok = math.isfinite(dxs[m]) and math.isfinite(dxl[m])
        for j in range(b, e):
            i = lit_var[j]
            q = np.float64(lit_sign[j])
            others = min2 if j == arg else min1
            contrib = g_scale * 0.5 * q * others
            if j == arg:
                contrib += r_scale * 0.5 * (q - v[i])
            dv[i] += contrib
            ok = ok and math.isfinite(contrib)
        if not ok and bad < 0:
            bad = m
    max_dv = 0.0
    for i in range(dv.shape[0]):
        a = abs(dv[i])
        if a > max_dv:
            max_dv = a
    out[0] = max_dv
    out[1] = max_c
    out[2] = unsat_count
    out[3] = unsat_weight
    return bad


@njit(cache=True)
def _apply_step(v, xs, xl, dv, dxs, dxl, dt, xl_max):
    for i in range(v.shape[0]):
        nv = v[i] + dt * dv[i]
        v[i] = min(1.0, max(-1.0, nv))
    for m in range(xs.shape[0]):
        ns = xs[m] + dt * dxs[m]
        xs[m] = min(1.0, max(0.0, ns))
        nl = xl[m] + dt * dxl[m]
        xl[m] = min(xl_max, max(1.0, nl))


@njit(cache=True)
def _run_kernel(v, xs, xl,
                clause_ptr, lit_var, lit_sign, drive, raw_weight,
                alpha, beta, gamma, delta, eps, zeta, xl_max,
                dt_state, dt_min, dt_max, max_dv_cap, grow, shrink,
                chunk_steps, t_budget, target_count,
                best, best_assign, step_base,
                ev_step, ev_time, ev_count, ev_weight,
                dv, dxs, dxl, vp, xsp, xlp, dv2, dxs2, dxl2,
                out, counters, heun):
    """Advance up to chunk_steps steps; returns a status code.

    counters: [steps_done, n_events, work_units, flow_evals].
    dt_state: [current dt, machine time t].
    best: [best_count, best_weight]; best_assign mirrors the
    lexicographically (weight, count)-best readout seen so far.
    """
    num_lits = lit_var.shape[0]
    steps_done = 0
    n_events = 0
    status = _RUNNING
    while steps_done < chunk_steps:
        bad = _eval_state(v, xs, xl, clause_ptr, lit_var, lit_sign, drive,
                          raw_weight, alpha, beta, gamma, delta, eps, zeta,
                          dv, dxs, dxl, out)
        counters[2] += 2 * num_lits
        counters[3] += 1
        if bad >= 0:
            out[4] = bad
            status = _NONFINITE
            break
        count = int(out[2])
        weight = int(out[3])
        improved = False
        if weight < best[1] or (weight == best[1] and count < best[0]):
            best[1] = weight
            for i in range(v.shape[0]):
                best_assign[i] = 1 if v[i] >= 0.0 else 0
            improved = True
        if count < best[0]:
            best[0] = count
            improved = True
        if improved:
            ev_step[n_events] = step_base + steps_done
            ev_time[n_events] = dt_state[1]
            ev_count[n_events] = best[0]
            ev_weight[n_events] = best[1]
            n_events += 1
        if best[0] <= target_count:
            status = _THRESHOLD
            break
        if out[0] < EQUILIBRIUM_TOL and out[1] < gamma:
            status = _EQUILIBRIUM
            break
        if dt_state[1] >= t_budget:
            status = _TIME_BUDGET
            break

        dt = dt_state[0]
        if heun == 0:
            while out[0] * dt > max_dv_cap:
                if dt <= dt_min:
                    status = _DT_UNDERFLOW
                    break
                dt = max(dt * shrink, dt_min)
            if status == _DT_UNDERFLOW:
                break
            _apply_step(v, xs, xl, dv, dxs, dxl, dt, xl_max)
        else:
            accepted = False
            while True:
                for i in range(v.shape[0]):
                    vp[i] = min(1.0, max(-1.0, v[i] + dt * dv[i]))
                for m in range(xs.shape[0]):
                    xsp[m] = min(1.0, max(0.0, xs[m] + dt * dxs[m]))
                    xlp[m] = min(xl_max, max(1.0, xl[m] + dt * dxl[m]))
                bad = _eval_state(vp, xsp, xlp, clause_ptr, lit_var, lit_sign,
                                  drive, raw_weight, alpha, beta, gamma, delta,
                                  eps, zeta, dv2, dxs2, dxl2, out)
                counters[2] += 2 * num_lits
                counters[3] += 1
                if bad >= 0:
                    out[4] = bad
                    status = _NONFINITE
                    break
                biggest = 0.0
                for i in range(v.shape[0]):
                    a = abs(0.5 * (dv[i] + dv2[i]))
                    if a > biggest:
                        biggest = a
                if biggest * dt <= max_dv_cap:
                    accepted = True
                    break
                if dt <= dt_min:
                    status = _DT_UNDERFLOW
                    break
                dt = max(dt * shrink, dt_min)
            if not accepted:
                break
            for i in range(v.shape[0]):
                nv = v[i] + dt * 0.5 * (dv[i] + dv2[i])
                v[i] = min(1.0, max(-1.0, nv))
            for m in range(xs.shape[0]):
                ns = xs[m] + dt * 0.5 * (dxs[m] + dxs2[m])
                xs[m] = min(1.0, max(0.0, ns))
                nl = xl[m] + dt * 0.5 * (dxl[m] + dxl2[m])
                xl[m] = min(xl_max, max(1.0, nl))

        dt_state[1] += dt
        dt_state[0] = min(dt * grow, dt_max)
        steps_done += 1

    counters[0] = steps_done
    counters[1] = n_events
    return status


def step(
    state: DmmState, circuit: Circuit, cfg: IntegratorConfig, dt: float | None = None
) -> tuple[DmmState, float, float]:
    """One controlled forward-Euler step.

    Returns (new state, dt_used, dt_next); dt defaults to cfg.dt_init.
    The proposal is retried at a smaller dt whenever it would move any
    voltage by more than cfg.max_dv; at dt_min it fails instead.
    """
    if cfg.method != "euler":
        raise IntegratorError("step() implements the forward-Euler scheme only")
    dt = cfg.dt_init if dt is None else dt
    dv, dxs, dxl = flow_field(state, circuit)
    max_rate = float(np.max(np.abs(dv))) if dv.size else 0.0
    while max_rate * dt > cfg.max_dv:
        if dt <= cfg.dt_min:
            raise StepSizeError(0, state.t, max_rate, cfg.dt_min)
        dt = max(dt * cfg.shrink, cfg.dt_min)
    new = DmmState(
        v=state.v + dt * dv,
        xs=state.xs + dt * dxs,
        xl=state.xl + dt * dxl,
        t=state.t + dt,
    )
    clamp_state(new, circuit)
    return new, dt, min(dt * cfg.grow, cfg.dt_max)


def _geometric_schedule(after: int) -> int:
    """Smallest sampling step strictly beyond `after` (powers of 1.2)."""
    nxt = max(1, after + 1)
    probe = 1.0
    while int(probe) < nxt:
        probe *= 1.2
    return int(probe)


def solve_circuit(circuit: Circuit, cfg: IntegratorConfig | None = None,
                  seed: int = 0, state: DmmState | None = None) -> SolveResult:
    """Integrate the circuit until the stopping rule fires."""
    cfg = cfg or IntegratorConfig()
    p = circuit.params
    state = init_state(circuit, seed) if state is None else state
    n, m = circuit.num_variables, circuit.num_clauses

    t_start = time.perf_counter()
    best_assign = np.asarray(readout(state), dtype=np.uint8)
    count, weight = _score(circuit, best_assign)
    best = np.array([count, weight], dtype=np.int64)
    target_count = int(math.floor(cfg.threshold * m + 1e-12))

    samples = [TraceSample(0.0, 0, 0.0, count, weight)]
    sampled_steps = {0}
    next_sample = _geometric_schedule(0)

    dt_state = np.array([cfg.dt_init, state.t], dtype=np.float64)
    dv = np.empty(n); dxs = np.empty(m); dxl = np.empty(m)
    vp = np.empty(n); xsp = np.empty(m); xlp = np.empty(m)
    dv2 = np.empty(n); dxs2 = np.empty(m); dxl2 = np.empty(m)
    out = np.zeros(5, dtype=np.float64)
    counters = np.zeros(4, dtype=np.int64)
    chunk = cfg.chunk_steps
    ev_step = np.empty(chunk, dtype=np.int64)
    ev_time = np.empty(chunk, dtype=np.float64)
    ev_count = np.empty(chunk, dtype=np.int64)
    ev_weight = np.empty(chunk, dtype=np.int64)
    heun = 1 if cfg.method == "heun" else 0

    total_steps = 0
    work_units = 0
    flow_evals = 0
    bounds_violations = 0
    status = "timeout"
    stopped = best[0] <= target_count
    if stopped:
        status = "threshold_met"

    while not stopped:
        remaining = cfg.max_steps - total_steps
        if remaining <= 0:
            status = "timeout"
            break
        this_chunk = min(chunk, remaining)
        chunk_wall0 = time.perf_counter() - t_start
        code = _run_kernel(
            state.v, state.xs, state.xl,
            circuit.clause_ptr, circuit.lit_var, circuit.lit_sign,
            circuit.drive, circuit.raw_weight,
            p.alpha, p.beta, p.gamma, p.delta, p.epsilon, p.zeta, circuit.xl_max,
            dt_state, cfg.dt_min, cfg.dt_max, cfg.max_dv, cfg.grow, cfg.shrink,
            this_chunk, cfg.max_time, target_count,
            best, best_assign, total_steps,
            ev_step, ev_time, ev_count, ev_weight,
            dv, dxs, dxl, vp, xsp, xlp, dv2, dxs2, dxl2,
            out, counters, heun,
        )
        chunk_steps_done = int(counters[0])
        n_events = int(counters[1])
        work_units = int(counters[2])
        flow_evals = int(counters[3])
        chunk_wall1 = time.perf_counter() - t_start

        for k in range(n_events):
            s = int(ev_step[k])
            local = s - total_steps
            frac = local / max(chunk_steps_done, 1)
            wall = chunk_wall0 + frac * (chunk_wall1 - chunk_wall0)
            if s not in sampled_steps:
                samples.append(TraceSample(float(ev_time[k]), s, wall,
                                           int(ev_count[k]), int(ev_weight[k])))
                sampled_steps.add(s)
        total_steps += chunk_steps_done
        state.t = float(dt_state[1])

        if total_steps >= next_sample and total_steps not in sampled_steps:
            samples.append(TraceSample(state.t, total_steps, chunk_wall1,
                                       int(best[0]), int(best[1])))
            sampled_steps.add(total_steps)
        while next_sample <= total_steps:
            next_sample = _geometric_schedule(next_sample)

        if not state.in_bounds(circuit):
            bounds_violations += 1

        if code == _THRESHOLD:
            status = "threshold_met"
            stopped = True
        elif code == _EQUILIBRIUM:
            status = "equilibrium"
            stopped = True
        elif code == _TIME_BUDGET:
            status = "timeout"
            stopped = True
        elif code == _DT_UNDERFLOW:
            raise StepSizeError(total_steps, state.t, float(out[0]), cfg.dt_min)
        elif code == _NONFINITE:
            from .circuit import FlowError

            raise FlowError(f"non-finite derivative at clause {int(out[4])}")
        if total_steps >= cfg.max_steps:
            status = "timeout" if not stopped else status
            stopped = True
        if time.perf_counter() - t_start >= cfg.max_wall_s:
            status = "timeout" if not stopped else status
            stopped = True

    # Score the final state too: the last accepted step inside a
    # finished chunk has not been through the evaluation sweep yet.
    final_assign = np.asarray(readout(state), dtype=np.uint8)
    fcount, fweight = _score(circuit, final_assign)
    wall_total = time.perf_counter() - t_start
    improved = False
    if fweight < best[1] or (fweight == best[1] and fcount < best[0]):
        best[1] = fweight
        best_assign[:] = final_assign
        improved = True
    if fcount < best[0]:
        best[0] = fcount
        improved = True
    if improved and total_steps not in sampled_steps:
        samples.append(TraceSample(state.t, total_steps, wall_total,
                                   int(best[0]), int(best[1])))
        sampled_steps.add(total_steps)
    if best[0] <= target_count:
        status = "threshold_met"
    if samples[-1].steps != total_steps:
        samples.append(TraceSample(state.t, total_steps, wall_total,
                                   int(best[0]), int(best[1])))

    assignment = best_assign.astype(bool)
    trace = SolverTrace(
        samples=samples,
        best_assignment=assignment,
        num_clauses=m,
        threshold=cfg.threshold,
        solver="dmm",
        stats={
            "steps": total_steps,
            "machine_time": state.t,
            "wall_s": wall_total,
            "work_units": work_units,
            "flow_evals": flow_evals,
            "bounds_violations": bounds_violations,
            "final_in_bounds": state.in_bounds(circuit),
            "memory_bytes": circuit.memory_bytes(),
            "method": cfg.method,
        },
    )
    return SolveResult(assignment=assignment, trace=trace, status=status)


def solve(formula: CnfFormula, params: DmmParams | None = None,
          cfg: IntegratorConfig | None = None, seed: int = 0) -> SolveResult:
    """Build the circuit for a formula and integrate it (see solve_circuit)."""
    return solve_circuit(build_circuit(formula, params), cfg, seed)


def _score(circuit: Circuit, assign01: np.ndarray) -> tuple[int, int]:
    """Unsat count and weight of a 0/1 assignment against the circuit."""
    count = 0
    weight = 0
    cp, lv, ls = circuit.clause_ptr, circuit.lit_var, circuit.lit_sign
    for m in range(circuit.num_clauses):
        sat = False
        for j in range(cp[m], cp[m + 1]):
            want = ls[j] > 0
            if bool(assign01[lv[j]]) == want:
                sat = True
                break
        if not sat:
            count += 1
            weight += int(circuit.raw_weight[m])
    return count, weight
