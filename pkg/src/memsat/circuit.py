"""Self-organizing logic circuit for a CNF formula and its flow field.

Each clause becomes a multi-terminal OR gate whose output is pinned to
logical 1; each variable becomes a shared voltage node v in [-1, 1]
(v > 0 reads as true).  A dynamic correction module per gate injects a
large current while the gate is logically inconsistent and a small one
otherwise; two memory variables per clause modulate that current:

  xs in [0, 1]     short-term activity memory,
  xl in [1, xlmax] long-term weight accumulated by persistent violation.

With h_j = (1 - q_j v_j)/2 the violation of literal j (q_j = +-1 its
polarity) and C_m = min_j h_j the gate inconsistency, the flow is

  G_{m,i} = 1/2 q_{m,i} min_{j != i} h_j        (gradient-like drive)
  R_{m,i} = 1/2 (q_{m,i} - v_i)  if i = argmin_j h_j else 0   (rigidity)
  dv_i    = sum_m w_m [ xl_m xs_m G_{m,i} + (1 + zeta xl_m)(1 - xs_m) R_{m,i} ]
  dxs_m   = beta (xs_m + eps) (C_m - gamma)
  dxl_m   = alpha (C_m - delta)

For a single-literal gate the empty min defaults to 1.  States are
clamped to their boxes after every step, which keeps all orbits
bounded.  Equilibria with every C_m = 0 read out as satisfying
assignments.  Argmin ties break toward the lowest variable index so
trajectories are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .formula import CnfFormula, effective_weights
from .rng import SplitMix64


class CircuitError(ValueError):
    """Invalid circuit construction or parameterization."""


class FlowError(FloatingPointError):
    """Non-finite derivative; names the offending clause."""


@dataclass(frozen=True)
class DmmParams:
    """Gate dynamics constants.

    xl_max is resolved per circuit (default 1e4 * num_clauses) so the
    long-term memory stays bounded on unsatisfiable inputs.
    """

    alpha: float = 5.0
    beta: float = 20.0
    gamma: float = 0.25
    delta: float = 0.05
    epsilon: float = 1e-3
    zeta: float = 0.1
    xl_max: float | None = None

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "epsilon", "zeta"):
            if getattr(self, name) <= 0:
                raise CircuitError(f"{name} must be positive")
        if not (0 < self.gamma < 1 and 0 < self.delta < 1):
            raise CircuitError("gamma and delta must lie in (0, 1)")
        if self.xl_max is not None and self.xl_max < 1:
            raise CircuitError("xl_max must be >= 1")

    @staticmethod
    def from_config(text: str) -> "DmmParams":
        from .config import parse_kv

        kv = parse_kv(text)
        kwargs = {}
        for name in ("alpha", "beta", "gamma", "delta", "epsilon", "zeta", "xl_max"):
            if name in kv:
                kwargs[name] = float(kv[name])
        return DmmParams(**kwargs)


# Preset for XOR-derived instances in the unsatisfiable phase.  Raising
# the memory thresholds makes the long-term weighting selective: only
# gates that stay substantially violated accumulate weight, which digs
# much deeper on balanced frustrated instances.  The defaults remain
# better at driving satisfiable inputs all the way to an equilibrium.
XOR_FRUSTRATED_PRESET = DmmParams(delta=0.5, alpha=2.0)

# SAT/UNSAT transition of XORSAT-derived formulas in SAT-clause density
# (4 x 0.918); above it the frustrated preset applies.
XOR_UNSAT_DENSITY = 3.67


def params_for_instance(family: str | None = None,
                        density: float | None = None) -> DmmParams:
    """Gate parameters recommended for a generated instance family.

    XOR-backed families (hyper/delta Max-E3SAT, raw XORSAT) whose
    SAT-clause density lies beyond the satisfiability transition get
    XOR_FRUSTRATED_PRESET; everything else gets the defaults.
    """
    if family in ("hyper_e3sat", "delta_e3sat", "xorsat") and density is not None:
        sat_density = 4.0 * density if family == "xorsat" else density
        if sat_density > XOR_UNSAT_DENSITY:
            return XOR_FRUSTRATED_PRESET
    return DmmParams()


@dataclass(frozen=True)
class Circuit:
    """Flattened gate arrays for one formula (CSR layout, 0-based)."""

    formula: CnfFormula
    num_variables: int
    num_clauses: int
    clause_ptr: np.ndarray   # int32[M+1], literal span of each gate
    lit_var: np.ndarray      # int32[L]
    lit_sign: np.ndarray     # int8[L], +1 plain / -1 negated
    drive: np.ndarray        # float64[M], current scale w_m
    raw_weight: np.ndarray   # int64[M], clause weights for unsat accounting
    hard: np.ndarray         # bool[M]
    var_ptr: np.ndarray      # int64[n+1], clause adjacency per variable
    var_clause: np.ndarray   # int32[sum occurrences]
    params: DmmParams
    xl_max: float

    @property
    def num_literals(self) -> int:
        return int(self.clause_ptr[-1])

    def memory_bytes(self) -> int:
        """Bytes held by the circuit arrays plus one solver state."""
        arrays = (
            self.clause_ptr, self.lit_var, self.lit_sign, self.drive,
            self.raw_weight, self.hard, self.var_ptr, self.var_clause,
        )
        state = 8 * (2 * self.num_variables + 4 * self.num_clauses)
        return sum(a.nbytes for a in arrays) + state


@dataclass
class DmmState:
    """Phase-space point: terminal voltages plus per-gate memories."""

    v: np.ndarray    # float64[n] in [-1, 1]
    xs: np.ndarray   # float64[M] in [0, 1]
    xl: np.ndarray   # float64[M] in [1, xl_max]
    t: float = 0.0

    def copy(self) -> "DmmState":
        return DmmState(self.v.copy(), self.xs.copy(), self.xl.copy(), self.t)

    def in_bounds(self, circuit: Circuit) -> bool:
        return bool(
            np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.xs))
            and np.all(np.isfinite(self.xl))
            and np.all(np.abs(self.v) <= 1.0)
            and np.all((self.xs >= 0.0) & (self.xs <= 1.0))
            and np.all((self.xl >= 1.0) & (self.xl <= circuit.xl_max))
        )


def build_circuit(formula: CnfFormula, params: DmmParams | None = None) -> Circuit:
    """Assemble the gate arrays; one gate per clause, one node per
    variable, construction linear in the total literal count."""
    params = params or DmmParams()
    n = formula.num_variables
    m = formula.num_clauses

    total = formula.num_literals
    clause_ptr = np.zeros(m + 1, dtype=np.int32)
    lit_var = np.empty(total, dtype=np.int32)
    lit_sign = np.empty(total, dtype=np.int8)
    pos = 0
    for ci, clause in enumerate(formula.clauses):
        for lit in clause.literals:
            lit_var[pos] = lit.var - 1
            lit_sign[pos] = -1 if lit.negated else 1
            pos += 1
        clause_ptr[ci + 1] = pos

    drive = np.asarray(effective_weights(formula), dtype=np.float64)
    raw_weight = np.fromiter((c.weight for c in formula.clauses), np.int64, m)
    hard = np.fromiter((c.hard for c in formula.clauses), np.bool_, m)

    counts = np.zeros(n, dtype=np.int64)
    for v in lit_var:
        counts[v] += 1
    var_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=var_ptr[1:])
    var_clause = np.empty(total, dtype=np.int32)
    cursor = var_ptr[:-1].copy()
    for ci in range(m):
        for j in range(clause_ptr[ci], clause_ptr[ci + 1]):
            v = lit_var[j]
            var_clause[cursor[v]] = ci
            cursor[v] += 1

    xl_max = params.xl_max if params.xl_max is not None else 1e4 * m
    return Circuit(
        formula=formula,
        num_variables=n,
        num_clauses=m,
        clause_ptr=clause_ptr,
        lit_var=lit_var,
        lit_sign=lit_sign,
        drive=drive,
        raw_weight=raw_weight,
        hard=hard,
        var_ptr=var_ptr,
        var_clause=var_clause,
        params=params,
        xl_max=float(xl_max),
    )


def validate_circuit(circuit: Circuit) -> None:
    """Check the drive-weight invariants, notably hard-gate dominance."""
    if np.any(circuit.drive <= 0):
        raise CircuitError("drive weights must be positive")
    for ci in np.nonzero(circuit.hard)[0]:
        neighbors: set[int] = set()
        for j in range(circuit.clause_ptr[ci], circuit.clause_ptr[ci + 1]):
            v = circuit.lit_var[j]
            for k in range(circuit.var_ptr[v], circuit.var_ptr[v + 1]):
                other = int(circuit.var_clause[k])
                if not circuit.hard[other]:
                    neighbors.add(other)
        soft_sum = float(sum(circuit.drive[o] for o in neighbors))
        if not circuit.drive[ci] > soft_sum:
            raise CircuitError(
                f"hard gate {ci}: drive {circuit.drive[ci]} does not exceed "
                f"soft neighbour sum {soft_sum}"
            )


def clause_satisfaction(circuit: Circuit, c: int, v: np.ndarray) -> float:
    """Gate inconsistency C_m = min over literals of (1 - q v)/2.

    Zero exactly when some literal voltage sits at its satisfying rail;
    1 when every literal is at the opposite rail.
    """
    if not 0 <= c < circuit.num_clauses:
        raise CircuitError(f"clause index {c} out of range")
    best = math.inf
    for j in range(circuit.clause_ptr[c], circuit.clause_ptr[c + 1]):
        h = 0.5 * (1.0 - float(circuit.lit_sign[j]) * v[circuit.lit_var[j]])
        best = min(best, h)
    return best


@njit(cache=True)
def _flow_kernel(v, xs, xl, clause_ptr, lit_var, lit_sign, drive,
                 alpha, beta, gamma, delta, eps, zeta,
                 dv, dxs, dxl, work):
    """Evaluate the flow field; returns -1 or the first non-finite gate.

    work[0] accumulates the number of literal visits (two sweeps per
    gate), making the linear-cost property directly measurable.
    """
    num_clauses = clause_ptr.shape[0] - 1
    for i in range(dv.shape[0]):
        dv[i] = 0.0
    visits = 0
    for m in range(num_clauses):
        b = clause_ptr[m]
        e = clause_ptr[m + 1]
        # argmin literal of C_m; ties go to the lowest variable index
        min1 = 1.0e308
        arg = -1
        argvar = 2147483647
        for j in range(b, e):
            h = 0.5 * (1.0 - np.float64(lit_sign[j]) * v[lit_var[j]])
            if h < min1 or (h == min1 and lit_var[j] < argvar):
                min1 = h
                arg = j
                argvar = lit_var[j]
        # smallest violation among the other literals (1.0 if none)
        min2 = 1.0
        for j in range(b, e):
            if j == arg:
                continue
            h = 0.5 * (1.0 - np.float64(lit_sign[j]) * v[lit_var[j]])
            if h < min2:
                min2 = h
        visits += 2 * (e - b)

        c_m = min1
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
        if not ok:
            work[0] += visits
            return m
    work[0] += visits
    return -1


def flow_field(
    state: DmmState, circuit: Circuit, work: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives (dv, dxs, dxl) of the circuit at this state."""
    p = circuit.params
    dv = np.empty_like(state.v)
    dxs = np.empty_like(state.xs)
    dxl = np.empty_like(state.xl)
    if work is None:
        work = np.zeros(1, dtype=np.int64)
    bad = _flow_kernel(
        state.v, state.xs, state.xl,
        circuit.clause_ptr, circuit.lit_var, circuit.lit_sign, circuit.drive,
        p.alpha, p.beta, p.gamma, p.delta, p.epsilon, p.zeta,
        dv, dxs, dxl, work,
    )
    if bad >= 0:
        raise FlowError(f"non-finite derivative at clause {bad}")
    return dv, dxs, dxl


def readout(state: DmmState) -> np.ndarray:
    """Boolean assignment from voltages: true iff v >= 0 (ties true)."""
    return state.v >= 0.0


def init_state(circuit: Circuit, seed: int = 0) -> DmmState:
    """Cold start: random voltages, short-term memory at its epsilon
    floor, long-term memory at 1.  Deterministic given the seed."""
    rng = SplitMix64(seed)
    v = np.empty(circuit.num_variables, dtype=np.float64)
    for i in range(circuit.num_variables):
        v[i] = 2.0 * rng.uniform() - 1.0
    xs = np.full(circuit.num_clauses, circuit.params.epsilon, dtype=np.float64)
    xl = np.ones(circuit.num_clauses, dtype=np.float64)
    return DmmState(v=v, xs=xs, xl=xl, t=0.0)


def clamp_state(state: DmmState, circuit: Circuit) -> None:
    """Project the state back into its box in place."""
    np.clip(state.v, -1.0, 1.0, out=state.v)
    np.clip(state.xs, 0.0, 1.0, out=state.xs)
    np.clip(state.xl, 1.0, circuit.xl_max, out=state.xl)


def with_xl_max(circuit: Circuit, xl_max: float) -> Circuit:
    return replace(circuit, xl_max=float(xl_max))


def dump_state(state: DmmState, path: str, binary: bool = False) -> None:
    """Snapshot a state for debugging.

    Binary layout: float64 little-endian, v block then xs block then
    xl block then t.  CSV layout: block,index,value rows in the same
    order with t as block "t".
    """
    if binary:
        flat = np.concatenate([state.v, state.xs, state.xl, [state.t]]).astype("<f8")
        flat.tofile(path)
        return
    with open(path, "w", encoding="ascii") as fh:
        fh.write("block,index,value\n")
        for name, arr in (("v", state.v), ("xs", state.xs), ("xl", state.xl)):
            for i, val in enumerate(arr):
                fh.write(f"{name},{i},{float(val)!r}\n")
        fh.write(f"t,0,{float(state.t)!r}\n")


def load_state(path: str, num_variables: int, num_clauses: int,
               binary: bool = False) -> DmmState:
    """Inverse of dump_state given the block sizes."""
    n, m = num_variables, num_clauses
    if binary:
        flat = np.fromfile(path, dtype="<f8")
        if flat.shape[0] != n + 2 * m + 1:
            raise CircuitError(f"state file has {flat.shape[0]} values, expected {n + 2 * m + 1}")
        return DmmState(flat[:n].copy(), flat[n:n + m].copy(), flat[n + m:n + 2 * m].copy(),
                        float(flat[-1]))
    v = np.empty(n); xs = np.empty(m); xl = np.empty(m); t = 0.0
    with open(path, "r", encoding="ascii") as fh:
        next(fh)
        for line in fh:
            block, idx, val = line.strip().split(",")
            if block == "v":
                v[int(idx)] = float(val)
            elif block == "xs":
                xs[int(idx)] = float(val)
            elif block == "xl":
                xl[int(idx)] = float(val)
            else:
                t = float(val)
    return DmmState(v, xs, xl, t)
