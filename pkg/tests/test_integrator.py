import math

import numpy as np
import pytest

from memsat.circuit import DmmParams, DmmState, build_circuit, init_state
from memsat.formula import CnfFormula, count_unsat
from memsat.gen import GenSpec, gen_delta_xorsat, gen_random_e3sat, xor_to_cnf
from memsat.integrator import (
    IntegratorConfig,
    IntegratorError,
    SolverTrace,
    StepSizeError,
    TraceSample,
    machine_time_report,
    solve,
    solve_circuit,
    step,
)


def rail_equilibrium_state(circuit, v):
    st = DmmState(np.asarray(v, dtype=np.float64),
                  np.zeros(circuit.num_clauses),
                  np.ones(circuit.num_clauses), 0.0)
    return st


class TestConfig:
    def test_validation(self):
        with pytest.raises(IntegratorError):
            IntegratorConfig(dt_min=1.0, dt_init=0.5)
        with pytest.raises(IntegratorError):
            IntegratorConfig(max_dv=0.0)
        with pytest.raises(IntegratorError):
            IntegratorConfig(grow=1.0)
        with pytest.raises(IntegratorError):
            IntegratorConfig(method="rk4")

    def test_from_config(self):
        cfg = IntegratorConfig.from_config(
            "dt_init = 0.5\nmax_steps = 100\nmethod = heun\nthreshold = 0.1\n")
        assert cfg.dt_init == 0.5 and cfg.max_steps == 100
        assert cfg.method == "heun" and cfg.threshold == 0.1


class TestStep:
    def test_zero_flow_grows_dt(self):
        f = CnfFormula.from_ints(2, [(1, 2)])
        c = build_circuit(f)
        st = rail_equilibrium_state(c, [1.0, -0.25])
        cfg = IntegratorConfig()
        dt = None
        grew = [cfg.dt_init]
        for _ in range(25):
            new, dt_used, dt = step(st, c, cfg, dt)
            assert np.array_equal(new.v, st.v)
            grew.append(dt)
            st = new
        assert all(b >= a for a, b in zip(grew, grew[1:]))
        assert dt == cfg.dt_max  # 2**-7 * 1.25**22 caps at dt_max

    def test_large_derivative_shrinks_dt_and_respects_cap(self):
        f = CnfFormula.from_ints(1, [(1,)], weights=[100])
        c = build_circuit(f)
        st = DmmState(np.array([-0.5]), np.ones(1), np.ones(1), 0.0)
        cfg = IntegratorConfig()
        new, dt_used, _ = step(st, c, cfg)
        assert dt_used < cfg.dt_init
        assert abs(new.v[0] - st.v[0]) <= cfg.max_dv + 1e-15

    def test_clamp_lands_exactly_on_rail(self):
        f = CnfFormula.from_ints(1, [(1,)], weights=[30])
        c = build_circuit(f)
        st = DmmState(np.array([0.99]), np.ones(1), np.ones(1), 0.0)
        new, _, _ = step(st, c, IntegratorConfig())
        assert new.v[0] == 1.0

    def test_underflow_raises(self):
        f = CnfFormula.from_ints(1, [(1,)], weights=[10**9])
        c = build_circuit(f)
        st = DmmState(np.array([-0.5]), np.ones(1), np.ones(1), 0.0)
        with pytest.raises(StepSizeError):
            step(st, c, IntegratorConfig())

    def test_machine_time_advances_by_dt_used(self):
        f = CnfFormula.from_ints(1, [(1,)])
        c = build_circuit(f)
        st = init_state(c, 0)
        new, dt_used, _ = step(st, c, IntegratorConfig())
        assert new.t == st.t + dt_used


class TestSolve:
    def test_single_clause_within_machine_time_10(self):
        f = CnfFormula.from_ints(1, [(1,)])
        for seed in range(10):
            res = solve(f, cfg=IntegratorConfig(max_time=10.0, max_steps=10000),
                        seed=seed)
            assert res.status in ("threshold_met", "equilibrium")
            assert res.assignment.tolist() == [True]
            assert res.trace.stats["machine_time"] <= 10.0

    def test_vacuous_threshold_immediate(self, example_formula):
        res = solve(example_formula, cfg=IntegratorConfig(threshold=1.0))
        assert res.status == "threshold_met"
        assert res.trace.stats["steps"] == 0
        assert len(res.trace.samples) == 1

    def test_desk_scale_delta_threshold(self):
        sys = gen_delta_xorsat(GenSpec("delta_e3sat", 100, 5.0, seed=14))
        f = xor_to_cnf(sys)
        cfg = IntegratorConfig(threshold=0.015, max_steps=400_000, max_dv=0.3)
        res = solve(f, DmmParams(delta=0.5, alpha=2.0), cfg, seed=5)
        assert res.status == "threshold_met"
        assert res.trace.best_fraction <= 0.015

    def test_best_monotone_and_time_increasing(self):
        f = gen_random_e3sat(GenSpec("random_e3sat", 40, 5.0, seed=10))
        res = solve(f, cfg=IntegratorConfig(threshold=0.0, max_steps=3000), seed=2)
        t = res.trace
        for a, b in zip(t.samples, t.samples[1:]):
            assert b.best_unsat_count <= a.best_unsat_count
            assert b.best_unsat_weight <= a.best_unsat_weight
            assert b.machine_time > a.machine_time
        # the reported best assignment scores exactly the recorded best
        c, w = count_unsat(f, res.assignment)
        assert (c, w) == (t.best_unsat_count, t.best_unsat_weight)

    def test_deterministic_trace(self):
        f = gen_random_e3sat(GenSpec("random_e3sat", 30, 4.5, seed=3))
        cfg = IntegratorConfig(threshold=0.0, max_steps=2000)
        r1 = solve(f, cfg=cfg, seed=9)
        r2 = solve(f, cfg=cfg, seed=9)
        assert [(s.machine_time, s.steps, s.best_unsat_count, s.best_unsat_weight)
                for s in r1.trace.samples] == \
               [(s.machine_time, s.steps, s.best_unsat_count, s.best_unsat_weight)
                for s in r2.trace.samples]
        assert np.array_equal(r1.assignment, r2.assignment)
        assert r1.status == r2.status

    def test_kernel_matches_stepwise_integration(self):
        f = gen_random_e3sat(GenSpec("random_e3sat", 18, 4.0, seed=6))
        c = build_circuit(f)
        cfg = IntegratorConfig(threshold=0.0, max_steps=250, chunk_steps=64)

        manual = init_state(c, 31)
        dt = None
        for _ in range(cfg.max_steps):
            manual, _, dt = step(manual, c, cfg, dt)

        fused = init_state(c, 31)
        res = solve_circuit(c, cfg, state=fused)
        if res.status == "timeout":  # ran all 250 steps
            assert np.array_equal(fused.v, manual.v)
            assert np.array_equal(fused.xs, manual.xs)
            assert np.array_equal(fused.xl, manual.xl)
            assert fused.t == manual.t

    def test_bounded_state_throughout(self):
        f = gen_random_e3sat(GenSpec("random_e3sat", 50, 5.0, seed=21))
        res = solve(f, cfg=IntegratorConfig(threshold=0.0, max_steps=5000), seed=1)
        assert res.trace.stats["bounds_violations"] == 0
        assert res.trace.stats["final_in_bounds"]

    def test_work_accounting_linear(self):
        f1 = gen_random_e3sat(GenSpec("random_e3sat", 24, 4.0, seed=2))
        f2 = CnfFormula(24, f1.clauses + f1.clauses)  # double the literals
        cfg = IntegratorConfig(threshold=0.0, max_steps=400)
        r1 = solve(f1, cfg=cfg, seed=3)
        r2 = solve(f2, cfg=cfg, seed=3)
        s1, s2 = r1.trace.stats, r2.trace.stats
        l1 = 3 * f1.num_clauses
        assert s1["work_units"] == 2 * l1 * s1["flow_evals"]
        assert s2["work_units"] == 2 * (2 * l1) * s2["flow_evals"]
        if s1["steps"] == s2["steps"] == 400:
            assert s2["work_units"] == 2 * s1["work_units"]

    def test_machine_time_budget_timeout(self):
        # two contradictory units can never satisfy both clauses
        f = CnfFormula.from_ints(1, [(1,), (-1,)])
        res = solve(f, cfg=IntegratorConfig(threshold=0.0, max_time=5.0,
                                            max_steps=100000))
        assert res.status == "timeout"
        assert res.trace.stats["machine_time"] >= 5.0
        assert res.trace.best_unsat_count == 1

    def test_heun_variant_runs_and_costs_two_evals(self):
        f = gen_random_e3sat(GenSpec("random_e3sat", 12, 3.0, seed=4))
        cfg = IntegratorConfig(threshold=0.0, max_steps=300, method="heun")
        res = solve(f, cfg=cfg, seed=8)
        stats = res.trace.stats
        assert stats["flow_evals"] >= 2 * stats["steps"]
        assert res.trace.best_unsat_count <= f.num_clauses

    def test_step_rejects_heun(self):
        f = CnfFormula.from_ints(1, [(1,)])
        c = build_circuit(f)
        with pytest.raises(IntegratorError):
            step(init_state(c, 0), c, IntegratorConfig(method="heun"))


class TestTraceReport:
    def _trace(self, rows, m=10, threshold=0.2):
        samples = [TraceSample(*r) for r in rows]
        return SolverTrace(samples=samples, best_assignment=np.zeros(1, bool),
                           num_clauses=m, threshold=threshold)

    def test_met_at_first_sample(self):
        tr = self._trace([(0.0, 0, 0.0, 1, 1), (1.0, 5, 0.1, 0, 0)])
        rep = machine_time_report(tr)
        assert rep.met and rep.steps == 0 and rep.machine_time == 0.0

    def test_never_met(self):
        tr = self._trace([(0.0, 0, 0.0, 9, 9), (1.0, 5, 0.1, 8, 8)])
        rep = machine_time_report(tr)
        assert not rep.met
        assert rep.steps is None and rep.machine_time is None and rep.wall_s is None

    def test_threshold_override(self):
        tr = self._trace([(0.0, 0, 0.0, 9, 9), (1.0, 5, 0.1, 4, 4),
                          (2.0, 9, 0.2, 1, 1)])
        rep = machine_time_report(tr, threshold=0.5)
        assert rep.met and rep.steps == 5

    def test_empty_trace_rejected(self):
        tr = SolverTrace(samples=[], best_assignment=np.zeros(1, bool),
                         num_clauses=5, threshold=0.0)
        with pytest.raises(IntegratorError):
            machine_time_report(tr)

    def test_csv_roundtrip(self, tmp_path):
        from memsat.charts import load_trace_csv

        tr = self._trace([(0.0, 0, 0.0, 4, 4), (1.5, 7, 0.25, 2, 2)])
        path = str(tmp_path / "t.csv")
        tr.write_csv(path)
        with open(path) as fh:
            assert fh.readline().strip() == "machine_time,steps,wall_s,unsat_count,unsat_frac"
        back = load_trace_csv(path)
        assert back.num_clauses == 10
        assert [(s.machine_time, s.steps, s.best_unsat_count) for s in back.samples] \
            == [(0.0, 0, 4), (1.5, 7, 2)]
