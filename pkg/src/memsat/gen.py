"""Instance generators and exact oracles.

Three Max-E3SAT families are produced here:

* random_e3sat  -- fully random 3-SAT clauses at a chosen density;
* hyper_e3sat   -- a random 3-XORSAT system expanded into CNF, four
                   clauses per parity equation;
* delta_e3sat   -- the same expansion applied to a balanced XORSAT
                   system in which every variable occurs the same
                   number of times (within one).

XORSAT systems are solvable in polynomial time over GF(2), which gives
an exact satisfiability oracle for the derived CNF instances; tiny
formulas get a brute-force optimum oracle.  All generation is
deterministic given the 64-bit seed in GenSpec (see rng.SplitMix64).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO

import io

from .formula import Assignment, Clause, CnfFormula, FormulaError, Literal, count_unsat
from .rng import SplitMix64

FAMILIES = ("random_e3sat", "hyper_e3sat", "delta_e3sat", "xorsat")

BRUTE_FORCE_MAX_VARS = 28

# Negation patterns of the four CNF clauses encoding x+y+z = 1 (mod 2);
# each pattern has an even number of negations.  The rhs=0 block flips
# the first variable's polarity everywhere (odd negation counts).
_XOR_BLOCK_RHS1 = ((0, 0, 0), (0, 1, 1), (1, 1, 0), (1, 0, 1))
_XOR_BLOCK_RHS0 = tuple((1 - p0, p1, p2) for (p0, p1, p2) in _XOR_BLOCK_RHS1)


class GenError(ValueError):
    """Invalid generation request or failed balanced repair."""


@dataclass(frozen=True)
class XorEquation:
    """Parity constraint: XOR of three distinct variables equals rhs."""

    variables: tuple[int, int, int]
    rhs: bool

    def __post_init__(self):
        if len(set(self.variables)) != 3:
            raise GenError(f"XOR equation needs 3 distinct variables, got {self.variables}")
        if min(self.variables) < 1:
            raise GenError("variable indices are 1-based")

    def satisfied_by(self, assignment: Assignment) -> bool:
        value = False
        for v in self.variables:
            value ^= bool(assignment[v - 1])
        return value == self.rhs


@dataclass(frozen=True)
class XorSystem:
    """A set of 3-variable parity constraints over variables 1..n."""

    num_variables: int
    equations: tuple[XorEquation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for eq in self.equations:
            if max(eq.variables) > self.num_variables:
                raise GenError(
                    f"equation {eq.variables} exceeds num_variables={self.num_variables}"
                )

    @property
    def num_equations(self) -> int:
        return len(self.equations)

    @property
    def xor_density(self) -> float:
        return len(self.equations) / self.num_variables

    def violated(self, assignment: Assignment) -> int:
        return sum(0 if eq.satisfied_by(assignment) else 1 for eq in self.equations)


@dataclass(frozen=True)
class GenSpec:
    """What to generate: family, size, density and seed.

    density is the SAT-clause density M/n for the three Max-E3SAT
    families and the XOR-equation density for family "xorsat".  For the
    XOR-derived SAT families, round(density*n) must be a multiple of 4
    so the equation count is exact.
    """

    family: str
    n: int
    density: float
    seed: int = 0
    rhs_all_ones: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GenError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if self.n < 3:
            raise GenError(f"need n >= 3, got {self.n}")
        if self.family == "delta_e3sat" and self.n < 4:
            raise GenError("delta_e3sat needs n >= 4")
        if self.density <= 0:
            raise GenError(f"density must be positive, got {self.density}")
        if self.family in ("hyper_e3sat", "delta_e3sat") and self.num_clauses % 4 != 0:
            raise GenError(
                f"family {self.family}: round(density*n)={self.num_clauses} "
                "must be a multiple of 4"
            )

    @property
    def num_clauses(self) -> int:
        """Clause count M = round(density*n), half-up."""
        return int(self.density * self.n + 0.5)

    @property
    def num_equations(self) -> int:
        """XOR equation count for the XOR-backed families."""
        if self.family == "xorsat":
            return self.num_clauses
        if self.family in ("hyper_e3sat", "delta_e3sat"):
            return self.num_clauses // 4
        raise GenError(f"family {self.family} has no XOR system")

    def to_config(self) -> str:
        lines = [
            f"family = {self.family}",
            f"n = {self.n}",
            f"density = {self.density!r}",
            f"seed = {self.seed}",
            f"rhs_all_ones = {str(self.rhs_all_ones).lower()}",
        ]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_config(text: str) -> "GenSpec":
        from .config import parse_kv

        kv = parse_kv(text)
        return GenSpec(
            family=kv["family"],
            n=int(kv["n"]),
            density=float(kv["density"]),
            seed=int(kv.get("seed", "0")),
            rhs_all_ones=kv.get("rhs_all_ones", "false").lower() in ("1", "true", "yes"),
        )


def gen_random_e3sat(spec: GenSpec) -> CnfFormula:
    """Random Max-E3SAT: per clause, 3 distinct variables drawn without
    replacement, each negated by a fair coin."""
    if spec.family != "random_e3sat":
        raise GenError(f"expected family random_e3sat, got {spec.family}")
    rng = SplitMix64(spec.seed)
    clauses = []
    for _ in range(spec.num_clauses):
        vs = rng.distinct(spec.n, 3)
        lits = tuple(Literal(v + 1, rng.coin()) for v in vs)
        clauses.append(Clause(lits))
    return CnfFormula(spec.n, tuple(clauses))


def _draw_rhs(rng: SplitMix64, all_ones: bool) -> bool:
    return True if all_ones else rng.coin()


def _xor_random(n: int, m: int, rng: SplitMix64, all_ones: bool) -> XorSystem:
    eqs = []
    for _ in range(m):
        vs = rng.distinct(n, 3)
        eqs.append(XorEquation(tuple(v + 1 for v in vs), _draw_rhs(rng, all_ones)))
    return XorSystem(n, tuple(eqs))


def _xor_balanced(n: int, m: int, rng: SplitMix64, all_ones: bool) -> XorSystem:
    """Balanced XORSAT: occurrence counts over the 3m slots differ by
    at most one across all variables.

    Build the slot multiset, shuffle, cut into consecutive triples,
    then repair duplicated variables by swapping an offending slot with
    a uniformly chosen slot of another triple.  Swaps preserve the
    occurrence counts exactly; the attempt bound guards against
    pathological (n, m) combinations.
    """
    slots_total = 3 * m
    base, extra = divmod(slots_total, n)
    variables = list(range(1, n + 1))
    rng.shuffle(variables)
    slots: list[int] = []
    for rank, v in enumerate(variables):
        slots.extend([v] * (base + 1 if rank < extra else base))
    rng.shuffle(slots)

    max_attempts = 100 * m
    attempts = 0
    while True:
        bad = [
            t for t in range(m)
            if len({slots[3 * t], slots[3 * t + 1], slots[3 * t + 2]}) != 3
        ]
        if not bad:
            break
        for t in bad:
            trio = slots[3 * t : 3 * t + 3]
            if len(set(trio)) == 3:
                continue  # an earlier swap in this sweep already fixed it
            attempts += 1
            if attempts > max_attempts:
                raise GenError(
                    f"balanced repair failed after {max_attempts} swaps (n={n}, m={m})"
                )
            # index (within the triple) of a slot participating in a repeat
            if trio[0] == trio[1] or trio[0] == trio[2]:
                offender = 3 * t
            else:
                offender = 3 * t + 1
            while True:
                other = rng.below(slots_total)
                if other // 3 != t:
                    break
            slots[offender], slots[other] = slots[other], slots[offender]

    eqs = []
    for t in range(m):
        trio = (slots[3 * t], slots[3 * t + 1], slots[3 * t + 2])
        eqs.append(XorEquation(trio, _draw_rhs(rng, all_ones)))
    return XorSystem(n, tuple(eqs))


def gen_xorsat(spec: GenSpec) -> XorSystem:
    """Random XORSAT system for family "xorsat" or "hyper_e3sat"."""
    if spec.family not in ("xorsat", "hyper_e3sat"):
        raise GenError(f"family {spec.family} is not XOR-random")
    return _xor_random(spec.n, spec.num_equations, SplitMix64(spec.seed), spec.rhs_all_ones)


def gen_delta_xorsat(spec: GenSpec) -> XorSystem:
    """Balanced XORSAT system for family "delta_e3sat"."""
    if spec.family != "delta_e3sat":
        raise GenError(f"expected family delta_e3sat, got {spec.family}")
    if spec.n < 4:
        raise GenError("balanced generation needs n >= 4")
    return _xor_balanced(spec.n, spec.num_equations, SplitMix64(spec.seed), spec.rhs_all_ones)


def occurrence_counts(sys: XorSystem) -> list[int]:
    counts = [0] * sys.num_variables
    for eq in sys.equations:
        for v in eq.variables:
            counts[v - 1] += 1
    return counts


def xor_to_cnf(sys: XorSystem) -> CnfFormula:
    """Expand each parity equation into its 4-clause CNF block.

    For any assignment, a satisfied equation contributes zero
    unsatisfied clauses and a violated one exactly one.
    """
    if sys.num_equations < 1:
        raise GenError("cannot convert an empty XOR system to CNF")
    clauses = []
    for eq in sys.equations:
        patterns = _XOR_BLOCK_RHS1 if eq.rhs else _XOR_BLOCK_RHS0
        for pattern in patterns:
            lits = tuple(
                Literal(v, bool(p)) for v, p in zip(eq.variables, pattern)
            )
            clauses.append(Clause(lits))
    return CnfFormula(sys.num_variables, tuple(clauses))


def generate(spec: GenSpec) -> CnfFormula:
    """Generate the CNF instance described by spec (any family)."""
    if spec.family == "random_e3sat":
        return gen_random_e3sat(spec)
    if spec.family == "hyper_e3sat":
        return xor_to_cnf(gen_xorsat(spec))
    if spec.family == "delta_e3sat":
        return xor_to_cnf(gen_delta_xorsat(spec))
    return xor_to_cnf(gen_xorsat(spec))


@dataclass(frozen=True)
class Gf2Result:
    """Outcome of GF(2) elimination.

    satisfiable -> solution is an assignment meeting every equation;
    otherwise certificate lists equation indices (0-based) whose XOR
    is the contradiction 0 = 1.
    """

    satisfiable: bool
    solution: tuple[bool, ...] | None = None
    certificate: tuple[int, ...] | None = None


def gf2_solve(sys: XorSystem) -> Gf2Result:
    """Solve the parity system by Gauss-Jordan elimination over GF(2).

    Rows are bit-packed into Python integers; an augmented identity
    block tracks which original equations combine into each row, which
    yields the UNSAT certificate directly.
    """
    n = sys.num_variables
    m = sys.num_equations
    rows = []
    rhs = []
    hist = []
    for i, eq in enumerate(sys.equations):
        mask = 0
        for v in eq.variables:
            mask |= 1 << (v - 1)
        rows.append(mask)
        rhs.append(1 if eq.rhs else 0)
        hist.append(1 << i)

    rank = 0
    pivot_cols = []
    for col in range(n):
        pivot = None
        for r in range(rank, m):
            if (rows[r] >> col) & 1:
                pivot = r
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        rhs[rank], rhs[pivot] = rhs[pivot], rhs[rank]
        hist[rank], hist[pivot] = hist[pivot], hist[rank]
        for r in range(m):
            if r != rank and ((rows[r] >> col) & 1):
                rows[r] ^= rows[rank]
                rhs[r] ^= rhs[rank]
                hist[r] ^= hist[rank]
        pivot_cols.append(col)
        rank += 1
        if rank == m:
            break

    for r in range(rank, m):
        if rhs[r]:
            cert = tuple(i for i in range(m) if (hist[r] >> i) & 1)
            return Gf2Result(False, certificate=cert)

    # Free variables default to False; after Gauss-Jordan each pivot row
    # determines its pivot column directly.
    solution = [False] * n
    for r, col in enumerate(pivot_cols):
        solution[col] = bool(rhs[r])
    return Gf2Result(True, solution=tuple(solution))


def brute_force_optimum(formula: CnfFormula) -> tuple[int, tuple[bool, ...]]:
    """Exhaustive Max-SAT optimum: minimum unsatisfied weight and one
    witness assignment (lowest-index witness on ties)."""
    import numpy as np

    n = formula.num_variables
    if n > BRUTE_FORCE_MAX_VARS:
        raise GenError(f"brute force capped at n <= {BRUTE_FORCE_MAX_VARS}, got {n}")
    total = 1 << n
    chunk = min(total, 1 << 20)
    best_weight = None
    best_index = 0
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        idx = np.arange(lo, hi, dtype=np.uint32)
        unsat = np.zeros(hi - lo, dtype=np.int64)
        for clause in formula.clauses:
            violated = np.ones(hi - lo, dtype=bool)
            for lit in clause.literals:
                bit = (idx >> np.uint32(lit.var - 1)) & np.uint32(1)
                lit_true = (bit == 0) if lit.negated else (bit == 1)
                violated &= ~lit_true
            unsat += clause.weight * violated
        pos = int(np.argmin(unsat))
        w = int(unsat[pos])
        if best_weight is None or w < best_weight:
            best_weight = w
            best_index = lo + pos
    witness = tuple(bool((best_index >> i) & 1) for i in range(n))
    return int(best_weight), witness


def write_xor(sys: XorSystem) -> str:
    """Text form of a parity system: "p xor n m" then "i j k b" lines."""
    out = [f"p xor {sys.num_variables} {sys.num_equations}"]
    for eq in sys.equations:
        i, j, k = eq.variables
        out.append(f"{i} {j} {k} {1 if eq.rhs else 0}")
    return "\n".join(out) + "\n"


def parse_xor(source: str | TextIO) -> XorSystem:
    """Parse the "p xor" text format written by write_xor."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    header = None
    eqs = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if header is None:
            if parts[:2] != ["p", "xor"] or len(parts) != 4:
                raise GenError(f"line {lineno}: expected 'p xor n m' header")
            header = (int(parts[2]), int(parts[3]))
            continue
        if len(parts) != 4:
            raise GenError(f"line {lineno}: expected 'i j k b'")
        i, j, k, b = (int(p) for p in parts)
        if b not in (0, 1):
            raise GenError(f"line {lineno}: rhs must be 0 or 1")
        eqs.append(XorEquation((i, j, k), bool(b)))
    if header is None:
        raise GenError("missing 'p xor' header")
    n, m = header
    if len(eqs) != m:
        raise GenError(f"declared {m} equations but found {len(eqs)}")
    return XorSystem(n, tuple(eqs))
