"""Stochastic local-search baseline: WalkSAT, optionally with
configuration checking.

Per iteration a uniformly random unsatisfied clause is chosen; with
probability `noise` a uniform variable of that clause is flipped,
otherwise the variable with the smallest break (weight of clauses the
flip would newly unsatisfy, ties broken uniformly).  Configuration
checking restricts both branches to variables whose clause-neighbours
changed since their last flip, falling back to a uniform choice within
the clause when no variable is eligible.

Bookkeeping is incremental: occurrence lists plus per-clause counts of
true literals make a flip O(occurrences).  Weighted formulas use the
same hard-clause dominance weights as the circuit solver, so the
baseline handles WCNF inputs on equal terms.  All randomness comes
from an inlined SplitMix64 stream, so runs are reproducible from the
seed.  Traces use the same schema as the integrator with the flip
count as machine time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .formula import Assignment, CnfFormula, FormulaError, effective_weights
from .integrator import SolverTrace, TraceSample

_U64 = np.uint64
_WEYL = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)

_RUNNING, _THRESHOLD = 0, 1


class BaselineError(ValueError):
    """Invalid local-search configuration."""


@dataclass(frozen=True)
class LsConfig:
    """Local-search knobs and budgets."""

    noise: float = 0.5
    max_flips: int = 10_000_000
    max_wall_s: float = math.inf
    cc_enabled: bool = False
    seed: int = 0
    threshold: float = 0.0
    restart_flips: int = 0      # 0 disables restarts
    chunk_flips: int = 65536

    def __post_init__(self):
        if not 0 <= self.noise <= 1:
            raise BaselineError("noise must lie in [0, 1]")
        if self.max_flips < 0 or self.max_wall_s <= 0:
            raise BaselineError("budgets must be positive")
        if not (0 <= self.threshold <= 1):
            raise BaselineError("threshold is an unsat fraction in [0, 1]")


@njit(cache=True)
def _sm_next(state):
    """SplitMix64: advance the Weyl counter and mix it."""
    s = state + _WEYL
    z = s
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    z = z ^ (z >> _U64(31))
    return s, z


@njit(cache=True)
def _sm_below(state, n):
    """Unbiased uniform in [0, n); same rejection rule as rng.SplitMix64."""
    nn = _U64(n)
    rem = (_U64(0) - nn) % nn          # 2**64 mod n
    while True:
        state, z = _sm_next(state)
        if rem == _U64(0) or z < (_U64(0) - rem):
            return state, np.int64(z % nn)


@njit(cache=True)
def _sm_uniform(state):
    state, z = _sm_next(state)
    return state, (z >> _U64(11)) * 2.0**-53


@njit(cache=True)
def _init_tables(assign, true_count, unsat_arr, unsat_pos,
                 clause_ptr, lit_var, lit_neg, raw_w):
    """Recompute satisfaction tables from scratch; returns (count, weight)."""
    m = clause_ptr.shape[0] - 1
    n_unsat = 0
    w_unsat = 0
    for c in range(m):
        cnt = 0
        for j in range(clause_ptr[c], clause_ptr[c + 1]):
            if assign[lit_var[j]] != lit_neg[j]:
                cnt += 1
        true_count[c] = cnt
        if cnt == 0:
            unsat_arr[n_unsat] = c
            unsat_pos[c] = n_unsat
            n_unsat += 1
            w_unsat += raw_w[c]
        else:
            unsat_pos[c] = -1
    return n_unsat, w_unsat


@njit(cache=True)
def _break_weight(var, assign, true_count, occ_ptr, occ_clause, occ_slot,
                  lit_var, lit_neg, clause_ptr, eff_w):
    """Summed drive weight of clauses this flip would newly unsatisfy."""
    total = 0
    for k in range(occ_ptr[var], occ_ptr[var + 1]):
        c = occ_clause[k]
        j = occ_slot[k]
        lit_true = assign[var] != lit_neg[j]
        if lit_true and true_count[c] == 1:
            total += eff_w[c]
    return total


@njit(cache=True)
def _walksat_kernel(assign, true_count, unsat_arr, unsat_pos, cur,
                    clause_ptr, lit_var, lit_neg,
                    occ_ptr, occ_clause, occ_slot,
                    eff_w, raw_w, eligible,
                    cc_enabled, noise, rng,
                    chunk_flips, target_count, restart_every,
                    best, best_assign, flip_base,
                    ev_flip, ev_count, ev_weight, counters):
    """Run up to chunk_flips flips; returns a status code.

    counters: [flips_done, n_events].  cur: [unsat_count, unsat_weight].
    best: [best_count, best_weight] with best_assign the snapshot of the
    (weight, count)-lexicographically best assignment seen.
    """
    n = assign.shape[0]
    state = rng[0]
    flips = 0
    n_events = 0
    status = _RUNNING
    while flips < chunk_flips:
        if best[0] <= target_count:
            status = _THRESHOLD
            break
        if cur[0] == 0:
            status = _THRESHOLD
            break

        state, pick = _sm_below(state, cur[0])
        c = unsat_arr[pick]
        b = clause_ptr[c]
        e = clause_ptr[c + 1]
        k = e - b

        # choose the variable to flip
        var = -1
        pool = k
        if cc_enabled:
            pool = 0
            for j in range(b, e):
                if eligible[lit_var[j]]:
                    pool += 1
        if pool == 0:
            state, r = _sm_below(state, k)
            var = lit_var[b + r]
        else:
            state, u = _sm_uniform(state)
            if u < noise:
                state, r = _sm_below(state, pool)
                if cc_enabled:
                    seen = 0
                    for j in range(b, e):
                        if eligible[lit_var[j]]:
                            if seen == r:
                                var = lit_var[j]
                                break
                            seen += 1
                else:
                    var = lit_var[b + r]
            else:
                best_break = np.int64(0)
                ties = 0
                for j in range(b, e):
                    vj = lit_var[j]
                    if cc_enabled and not eligible[vj]:
                        continue
                    bw = _break_weight(vj, assign, true_count, occ_ptr,
                                       occ_clause, occ_slot, lit_var, lit_neg,
                                       clause_ptr, eff_w)
                    if ties == 0 or bw < best_break:
                        best_break = bw
                        var = vj
                        ties = 1
                    elif bw == best_break:
                        ties += 1
                        state, r = _sm_below(state, ties)
                        if r == 0:
                            var = vj

        # flip and update tables incrementally
        assign[var] = 1 - assign[var]
        for kk in range(occ_ptr[var], occ_ptr[var + 1]):
            c2 = occ_clause[kk]
            j = occ_slot[kk]
            if assign[var] != lit_neg[j]:
                true_count[c2] += 1
                if true_count[c2] == 1:
                    pos = unsat_pos[c2]
                    last = cur[0] - 1
                    moved = unsat_arr[last]
                    unsat_arr[pos] = moved
                    unsat_pos[moved] = pos
                    unsat_pos[c2] = -1
                    cur[0] -= 1
                    cur[1] -= raw_w[c2]
            else:
                true_count[c2] -= 1
                if true_count[c2] == 0:
                    unsat_arr[cur[0]] = c2
                    unsat_pos[c2] = cur[0]
                    cur[0] += 1
                    cur[1] += raw_w[c2]
        if cc_enabled:
            for kk in range(occ_ptr[var], occ_ptr[var + 1]):
                c2 = occ_clause[kk]
                for j in range(clause_ptr[c2], clause_ptr[c2 + 1]):
                    eligible[lit_var[j]] = 1
            eligible[var] = 0

        flips += 1
        improved = False
        if cur[1] < best[1] or (cur[1] == best[1] and cur[0] < best[0]):
            best[1] = cur[1]
            for i in range(n):
                best_assign[i] = assign[i]
            improved = True
        if cur[0] < best[0]:
            best[0] = cur[0]
            improved = True
        if improved:
            ev_flip[n_events] = flip_base + flips
            ev_count[n_events] = best[0]
            ev_weight[n_events] = best[1]
            n_events += 1

        if restart_every > 0 and (flip_base + flips) % restart_every == 0:
            for i in range(n):
                state, z = _sm_next(state)
                assign[i] = 1 if (z >> _U64(63)) else 0
                eligible[i] = 1
            c0, w0 = _init_tables(assign, true_count, unsat_arr, unsat_pos,
                                  clause_ptr, lit_var, lit_neg, raw_w)
            cur[0] = c0
            cur[1] = w0

    rng[0] = state
    counters[0] = flips
    counters[1] = n_events
    return status


def _build_arrays(formula: CnfFormula):
    n = formula.num_variables
    m = formula.num_clauses
    total = formula.num_literals
    clause_ptr = np.zeros(m + 1, dtype=np.int32)
    lit_var = np.empty(total, dtype=np.int32)
    lit_neg = np.empty(total, dtype=np.uint8)
    pos = 0
    for ci, clause in enumerate(formula.clauses):
        for lit in clause.literals:
            lit_var[pos] = lit.var - 1
            lit_neg[pos] = 1 if lit.negated else 0
            pos += 1
        clause_ptr[ci + 1] = pos
    counts = np.zeros(n, dtype=np.int64)
    for v in lit_var:
        counts[v] += 1
    occ_ptr = np.zeros(n + 1, dtype=np.int32)
    np.cumsum(counts, out=occ_ptr[1:])
    occ_clause = np.empty(total, dtype=np.int32)
    occ_slot = np.empty(total, dtype=np.int32)
    cursor = occ_ptr[:-1].copy()
    for ci in range(m):
        for j in range(clause_ptr[ci], clause_ptr[ci + 1]):
            v = lit_var[j]
            occ_clause[cursor[v]] = ci
            occ_slot[cursor[v]] = j
            cursor[v] += 1
    eff_w = np.asarray(effective_weights(formula), dtype=np.int64)
    raw_w = np.fromiter((c.weight for c in formula.clauses), np.int64, m)
    return clause_ptr, lit_var, lit_neg, occ_ptr, occ_clause, occ_slot, eff_w, raw_w


def walksat(formula: CnfFormula, cfg: LsConfig | None = None) -> tuple[np.ndarray, SolverTrace]:
    """WalkSAT local search; returns (best assignment, trace)."""
    cfg = cfg or LsConfig()
    n = formula.num_variables
    m = formula.num_clauses
    (clause_ptr, lit_var, lit_neg, occ_ptr, occ_clause, occ_slot,
     eff_w, raw_w) = _build_arrays(formula)

    t_start = time.perf_counter()
    rng = np.empty(1, dtype=np.uint64)
    rng[0] = np.uint64(cfg.seed & ((1 << 64) - 1))
    assign = np.empty(n, dtype=np.uint8)
    state = rng[0]
    for i in range(n):
        state, z = _host_next(int(state))
        assign[i] = 1 if (z >> 63) & 1 else 0
    rng[0] = np.uint64(state)

    true_count = np.zeros(m, dtype=np.int32)
    unsat_arr = np.zeros(m, dtype=np.int32)
    unsat_pos = np.full(m, -1, dtype=np.int32)
    c0, w0 = _init_tables(assign, true_count, unsat_arr, unsat_pos,
                          clause_ptr, lit_var, lit_neg, raw_w)
    cur = np.array([c0, w0], dtype=np.int64)
    best = cur.copy()
    best_assign = assign.copy()
    eligible = np.ones(n, dtype=np.uint8)

    target_count = int(math.floor(cfg.threshold * m + 1e-12))
    samples = [TraceSample(0.0, 0, 0.0, int(best[0]), int(best[1]))]
    sampled = {0}
    next_sample = 1

    chunk = cfg.chunk_flips
    ev_flip = np.empty(chunk, dtype=np.int64)
    ev_count = np.empty(chunk, dtype=np.int64)
    ev_weight = np.empty(chunk, dtype=np.int64)
    counters = np.zeros(2, dtype=np.int64)

    total_flips = 0
    status = _RUNNING if best[0] > target_count else _THRESHOLD
    while status == _RUNNING:
        remaining = cfg.max_flips - total_flips
        if remaining <= 0:
            break
        wall0 = time.perf_counter() - t_start
        status = _walksat_kernel(
            assign, true_count, unsat_arr, unsat_pos, cur,
            clause_ptr, lit_var, lit_neg, occ_ptr, occ_clause, occ_slot,
            eff_w, raw_w, eligible,
            cfg.cc_enabled, cfg.noise, rng,
            min(chunk, remaining), target_count, cfg.restart_flips,
            best, best_assign, total_flips,
            ev_flip, ev_count, ev_weight, counters,
        )
        flips_done = int(counters[0])
        wall1 = time.perf_counter() - t_start
        for k in range(int(counters[1])):
            f = int(ev_flip[k])
            local = f - total_flips
            wall = wall0 + (wall1 - wall0) * local / max(flips_done, 1)
            if f not in sampled:
                samples.append(TraceSample(float(f), f, wall,
                                           int(ev_count[k]), int(ev_weight[k])))
                sampled.add(f)
        total_flips += flips_done
        if total_flips >= next_sample and total_flips not in sampled:
            samples.append(TraceSample(float(total_flips), total_flips, wall1,
                                       int(best[0]), int(best[1])))
            sampled.add(total_flips)
        while next_sample <= total_flips:
            next_sample = max(next_sample + 1, int(next_sample * 1.2))
        if time.perf_counter() - t_start >= cfg.max_wall_s:
            break

    wall_total = time.perf_counter() - t_start
    if samples[-1].steps != total_flips:
        samples.append(TraceSample(float(total_flips), total_flips, wall_total,
                                   int(best[0]), int(best[1])))

    solver = "walksat_cc" if cfg.cc_enabled else "walksat"
    arrays = (clause_ptr, lit_var, lit_neg, occ_ptr, occ_clause, occ_slot,
              eff_w, raw_w, assign, true_count, unsat_arr, unsat_pos,
              eligible, best_assign)
    trace = SolverTrace(
        samples=samples,
        best_assignment=best_assign.astype(bool),
        num_clauses=m,
        threshold=cfg.threshold,
        solver=solver,
        stats={
            "flips": total_flips,
            "wall_s": wall_total,
            "memory_bytes": sum(a.nbytes for a in arrays),
        },
    )
    return best_assign.astype(bool), trace


def walksat_cc(formula: CnfFormula, cfg: LsConfig | None = None) -> tuple[np.ndarray, SolverTrace]:
    """WalkSAT with the configuration-checking eligibility rule."""
    cfg = cfg or LsConfig()
    if not cfg.cc_enabled:
        cfg = LsConfig(noise=cfg.noise, max_flips=cfg.max_flips,
                       max_wall_s=cfg.max_wall_s, cc_enabled=True,
                       seed=cfg.seed, threshold=cfg.threshold,
                       restart_flips=cfg.restart_flips,
                       chunk_flips=cfg.chunk_flips)
    return walksat(formula, cfg)


def _host_next(state: int) -> tuple[int, int]:
    """Python-side SplitMix64 step, identical to the kernel's."""
    mask = (1 << 64) - 1
    s = (state + 0x9E3779B97F4A7C15) & mask
    z = s
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    z = z ^ (z >> 31)
    return s, z


def weighted_break(formula: CnfFormula, assignment: Assignment, var: int) -> int:
    """Drive weight of clauses flipped from satisfied to unsatisfied if
    `var` (1-based) flips; hard clauses count their dominance weight.

    Recomputed directly from the formula, independent of the search's
    incremental tables.
    """
    if not 1 <= var <= formula.num_variables:
        raise FormulaError(f"variable {var} out of range 1..{formula.num_variables}")
    if len(assignment) != formula.num_variables:
        raise FormulaError("assignment length mismatch")
    weights = effective_weights(formula)
    total = 0
    for w, clause in zip(weights, formula.clauses):
        true_lits = sum(1 for lit in clause.literals if lit.value(assignment))
        if true_lits != 1:
            continue
        for lit in clause.literals:
            if lit.var == var and lit.value(assignment):
                total += w
                break
    return total
