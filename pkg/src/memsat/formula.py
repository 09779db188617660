"""Boolean CNF/WCNF formulas: representation, DIMACS I/O and evaluation.

Variables are numbered 1..n externally (DIMACS convention); the
conversion to 0-based indices happens only inside the numeric solver
arrays.  All types here are immutable, so formulas can be shared
freely across concurrent solver runs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO


class FormulaError(ValueError):
    """Structurally invalid formula."""


class DimacsError(ValueError):
    """Malformed DIMACS input; message names the offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Literal:
    """A possibly negated variable; var is a 1-based index."""

    var: int
    negated: bool = False

    def __post_init__(self):
        if self.var < 1:
            raise FormulaError(f"variable index must be >= 1, got {self.var}")

    @staticmethod
    def from_int(lit: int) -> "Literal":
        if lit == 0:
            raise FormulaError("0 is not a DIMACS literal")
        return Literal(abs(lit), lit < 0)

    def to_int(self) -> int:
        return -self.var if self.negated else self.var

    def value(self, assignment: Sequence[bool]) -> bool:
        v = bool(assignment[self.var - 1])
        return (not v) if self.negated else v


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals with an optional weight / hard flag.

    Hard clauses carry the WCNF top-weight convention: their stored
    weight equals the format's "top" sentinel.
    """

    literals: tuple[Literal, ...]
    weight: int = 1
    hard: bool = False

    def __post_init__(self):
        if len(self.literals) < 1:
            raise FormulaError("empty clause")
        seen = set()
        for lit in self.literals:
            if lit.var in seen:
                raise FormulaError(f"variable {lit.var} repeated within clause")
            seen.add(lit.var)
        if self.weight < 1:
            raise FormulaError(f"clause weight must be >= 1, got {self.weight}")

    @staticmethod
    def from_ints(lits: Iterable[int], weight: int = 1, hard: bool = False) -> "Clause":
        return Clause(tuple(Literal.from_int(v) for v in lits), weight, hard)

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        return any(lit.value(assignment) for lit in self.literals)

    def variables(self) -> tuple[int, ...]:
        return tuple(lit.var for lit in self.literals)


@dataclass(frozen=True)
class CnfFormula:
    """A CNF/WCNF formula over variables 1..num_variables."""

    num_variables: int
    clauses: tuple[Clause, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_variables < 1:
            raise FormulaError("formula needs at least one variable")
        if len(self.clauses) < 1:
            raise FormulaError("formula needs at least one clause")
        for c in self.clauses:
            for lit in c.literals:
                if lit.var > self.num_variables:
                    raise FormulaError(
                        f"literal variable {lit.var} exceeds num_variables={self.num_variables}"
                    )

    @staticmethod
    def from_ints(
        num_variables: int,
        clause_lits: Iterable[Iterable[int]],
        weights: Iterable[int] | None = None,
        hard: Iterable[bool] | None = None,
    ) -> "CnfFormula":
        lits = [tuple(c) for c in clause_lits]
        ws = list(weights) if weights is not None else [1] * len(lits)
        hs = list(hard) if hard is not None else [False] * len(lits)
        clauses = tuple(Clause.from_ints(c, w, h) for c, w, h in zip(lits, ws, hs))
        return CnfFormula(num_variables, clauses)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def density(self) -> float:
        """Clause-to-variable ratio M/n."""
        return len(self.clauses) / self.num_variables

    @property
    def num_literals(self) -> int:
        return sum(len(c.literals) for c in self.clauses)

    def is_weighted(self) -> bool:
        return any(c.hard or c.weight != 1 for c in self.clauses)

    def soft_weight_sum(self) -> int:
        return sum(c.weight for c in self.clauses if not c.hard)

    def top_weight(self) -> int:
        """Canonical WCNF top: one more than the total soft weight."""
        return self.soft_weight_sum() + 1


Assignment = Sequence[bool]


def count_unsat(formula: CnfFormula, assignment: Assignment) -> tuple[int, int]:
    """Number and total weight of clauses with no true literal.

    Both are zero exactly when the assignment satisfies the formula.
    """
    if len(assignment) != formula.num_variables:
        raise FormulaError(
            f"assignment length {len(assignment)} != num_variables {formula.num_variables}"
        )
    count = 0
    weight = 0
    for clause in formula.clauses:
        if not clause.satisfied_by(assignment):
            count += 1
            weight += clause.weight
    return count, weight


def assignment_distance(x: Assignment, y: Assignment) -> int:
    """Sum of squared coordinate differences with booleans as 0/1.

    For boolean vectors this equals the Hamming distance (number of
    flips separating the two assignments).
    """
    if len(x) != len(y):
        raise FormulaError(f"assignment lengths differ: {len(x)} != {len(y)}")
    return sum((int(bool(a)) - int(bool(b))) ** 2 for a, b in zip(x, y))


def effective_weights(formula: CnfFormula) -> list[int]:
    """Per-clause drive weights with hard-clause dominance.

    Soft clauses keep their own weight.  Each hard clause gets one more
    than the summed weight of all soft clauses sharing a variable with
    it, so its correction current always outweighs the combined pull of
    its soft neighbours.
    """
    var_soft: dict[int, list[int]] = {}
    for idx, clause in enumerate(formula.clauses):
        if not clause.hard:
            for v in clause.variables():
                var_soft.setdefault(v, []).append(idx)
    weights = []
    for clause in formula.clauses:
        if not clause.hard:
            weights.append(clause.weight)
            continue
        neighbors: set[int] = set()
        for v in clause.variables():
            neighbors.update(var_soft.get(v, ()))
        weights.append(1 + sum(formula.clauses[j].weight for j in sorted(neighbors)))
    return weights


def _tokenize(stream: TextIO):
    """Yield (token, line_number); stops at a legacy '%' terminator."""
    for lineno, raw in enumerate(stream, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("%"):
            return
        for tok in stripped.split():
            if tok == "%":
                return
            yield tok, lineno


def parse_dimacs(source: str | TextIO) -> CnfFormula:
    """Parse DIMACS CNF ("p cnf n m") or WCNF ("p wcnf n m top") text.

    Comment lines start with 'c'; a line starting with '%' terminates
    the file (legacy SATLIB convention).  In WCNF, clauses whose weight
    is >= top are marked hard and stored with weight equal to top.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    tokens = _tokenize(stream)

    try:
        tok, lineno = next(tokens)
    except StopIteration:
        raise DimacsError("missing 'p' header", 0) from None
    if tok != "p":
        raise DimacsError(f"expected 'p' header, got {tok!r}", lineno)

    header: list[str] = []
    header_line = lineno
    try:
        fmt, _ = next(tokens)
        header.append(fmt)
        want = 3 if fmt == "wcnf" else 2
        for _ in range(want):
            t, header_line = next(tokens)
            header.append(t)
    except StopIteration:
        raise DimacsError("truncated 'p' header", header_line) from None

    fmt = header[0]
    if fmt not in ("cnf", "wcnf"):
        raise DimacsError(f"unknown format {fmt!r} (expected cnf or wcnf)", header_line)
    try:
        nums = [int(t) for t in header[1:]]
    except ValueError:
        raise DimacsError(f"non-integer field in 'p {fmt}' header", header_line) from None
    num_vars, num_clauses = nums[0], nums[1]
    top = nums[2] if fmt == "wcnf" else None
    if num_vars < 1:
        raise DimacsError(f"variable count must be >= 1, got {num_vars}", header_line)
    if num_clauses < 1:
        raise DimacsError(f"clause count must be >= 1, got {num_clauses}", header_line)
    if top is not None and top < 1:
        raise DimacsError(f"top weight must be >= 1, got {top}", header_line)

    clauses: list[Clause] = []
    lits: list[int] = []
    weight: int | None = None
    last_line = header_line
    for tok, lineno in tokens:
        last_line = lineno
        try:
            value = int(tok)
        except ValueError:
            raise DimacsError(f"non-integer token {tok!r}", lineno) from None
        if fmt == "wcnf" and weight is None:
            if value < 1:
                raise DimacsError(f"clause weight must be >= 1, got {value}", lineno)
            weight = value
            continue
        if value == 0:
            if not lits:
                raise DimacsError("empty clause", lineno)
            if len(clauses) == num_clauses:
                raise DimacsError(f"more than the declared {num_clauses} clauses", lineno)
            hard = fmt == "wcnf" and weight >= top  # type: ignore[operator]
            w = top if hard else (weight if weight is not None else 1)
            seen: set[int] = set()
            for lit in lits:
                if abs(lit) in seen:
                    raise DimacsError(f"variable {abs(lit)} repeated within clause", lineno)
                seen.add(abs(lit))
                if abs(lit) > num_vars:
                    raise DimacsError(f"variable {abs(lit)} out of range 1..{num_vars}", lineno)
            clauses.append(Clause.from_ints(lits, w, hard))
            lits = []
            weight = None
        else:
            lits.append(value)

    if lits or weight is not None:
        raise DimacsError("clause not terminated by 0", last_line)
    if len(clauses) != num_clauses:
        raise DimacsError(
            f"declared {num_clauses} clauses but found {len(clauses)}", last_line
        )
    return CnfFormula(num_vars, tuple(clauses))


def write_dimacs(formula: CnfFormula) -> str:
    """Canonical DIMACS text: one clause per line, stored literal order.

    WCNF is emitted exactly when some clause is weighted or hard; the
    top weight is then recomputed as (sum of soft weights) + 1 and hard
    clauses are written with that weight.
    """
    out: list[str] = []
    n, m = formula.num_variables, formula.num_clauses
    if formula.is_weighted():
        top = formula.top_weight()
        out.append(f"p wcnf {n} {m} {top}")
        for clause in formula.clauses:
            w = top if clause.hard else clause.weight
            body = " ".join(str(l.to_int()) for l in clause.literals)
            out.append(f"{w} {body} 0")
    else:
        out.append(f"p cnf {n} {m}")
        for clause in formula.clauses:
            body = " ".join(str(l.to_int()) for l in clause.literals)
            out.append(f"{body} 0")
    return "\n".join(out) + "\n"
