"""memsat: Max-SAT solving by simulating self-organizing logic circuits.

A CNF formula is mapped onto a circuit of self-organizing OR gates
whose continuous dynamics relax toward configurations satisfying as
many clauses as possible; numerical integration of that flow is the
solver.  The package also ships the matching hard-instance generators
(random/hyper/delta Max-E3SAT, XORSAT), exact oracles (GF(2)
elimination, brute force), a WalkSAT baseline and a benchmark harness
with chart output.
"""

__version__ = "0.1.0"

from .formula import (
    Assignment,
    Clause,
    CnfFormula,
    DimacsError,
    FormulaError,
    Literal,
    assignment_distance,
    count_unsat,
    effective_weights,
    parse_dimacs,
    write_dimacs,
)
from .gen import (
    GenError,
    GenSpec,
    Gf2Result,
    XorEquation,
    XorSystem,
    brute_force_optimum,
    gen_delta_xorsat,
    gen_random_e3sat,
    gen_xorsat,
    generate,
    gf2_solve,
    parse_xor,
    write_xor,
    xor_to_cnf,
)
from .circuit import (
    Circuit,
    CircuitError,
    DmmParams,
    DmmState,
    FlowError,
    build_circuit,
    clause_satisfaction,
    flow_field,
    init_state,
    readout,
    validate_circuit,
)
from .integrator import (
    IntegratorConfig,
    SolveResult,
    SolverTrace,
    StepSizeError,
    ThresholdReport,
    TraceSample,
    machine_time_report,
    solve,
    solve_circuit,
    step,
)
from .baseline import LsConfig, walksat, walksat_cc, weighted_break

__all__ = [name for name in dir() if not name.startswith("_")]
