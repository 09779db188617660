import itertools

import pytest

from memsat.formula import (
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
from memsat.gen import GenSpec, gen_random_e3sat
from memsat.rng import SplitMix64


def brute_unsat(formula, assignment):
    """Independent per-clause evaluator used as the oracle."""
    count = weight = 0
    for clause in formula.clauses:
        true_vars = {i + 1 for i, val in enumerate(assignment) if val}
        ok = any((lit.var in true_vars) != lit.negated for lit in clause.literals)
        if not ok:
            count += 1
            weight += clause.weight
    return count, weight


class TestParse:
    def test_single_clause(self):
        f = parse_dimacs("p cnf 4 1\n-1 2 0")
        assert f.num_variables == 4
        assert len(f.clauses) == 1
        assert [l.to_int() for l in f.clauses[0].literals] == [-1, 2]

    def test_wcnf_hard_and_soft(self):
        f = parse_dimacs("p wcnf 2 2 100\n100 1 2 0\n3 -1 0\n")
        assert f.clauses[0].hard and f.clauses[0].weight == 100
        assert not f.clauses[1].hard and f.clauses[1].weight == 3

    def test_comments_blank_lines_multiline_clauses(self):
        text = "c header comment\n\np cnf 3 2\n1 2\n3 0\nc mid comment\n-1 -2 -3 0\n"
        f = parse_dimacs(text)
        assert len(f.clauses) == 2
        assert [l.to_int() for l in f.clauses[0].literals] == [1, 2, 3]

    def test_percent_terminated_legacy_file(self):
        text = "p cnf 2 1\n1 -2 0\n%\n0\n"
        f = parse_dimacs(text)
        assert len(f.clauses) == 1

    @pytest.mark.parametrize("text,fragment", [
        ("p dnf 2 1\n1 0", "unknown format"),
        ("p cnf x 1\n1 0", "non-integer"),
        ("1 2 0", "expected 'p' header"),
        ("p cnf 2 0\n", "clause count"),
        ("p cnf 2 1\n3 0", "out of range"),
        ("p cnf 2 1\n1 -1 0", "repeated"),
        ("p cnf 2 2\n1 0", "declared 2 clauses"),
        ("p cnf 2 1\n1 2 0\n-1 0", "more than the declared"),
        ("p cnf 2 1\n1 2", "not terminated"),
        ("p cnf 2 1\n0", "empty clause"),
        ("p wcnf 2 1 5\n0 1 0", "weight"),
    ])
    def test_errors_name_line(self, text, fragment):
        with pytest.raises(DimacsError, match="line"):
            try:
                parse_dimacs(text)
            except DimacsError as err:
                assert fragment in str(err)
                raise

    def test_roundtrip_generated(self):
        rng = SplitMix64(11)
        for _ in range(50):
            n = 5 + rng.below(40)
            density = 1.0 + rng.uniform() * 4
            f = gen_random_e3sat(GenSpec("random_e3sat", n, density, seed=rng.next_u64()))
            assert parse_dimacs(write_dimacs(f)) == f

    def test_roundtrip_example(self, example_formula):
        assert parse_dimacs(write_dimacs(example_formula)) == example_formula


class TestWrite:
    def test_single_positive_clause(self):
        f = CnfFormula.from_ints(1, [(1,)])
        assert write_dimacs(f) == "p cnf 1 1\n1 0\n"

    def test_wcnf_top_is_soft_sum_plus_one(self):
        f = CnfFormula.from_ints(
            3, [(1, 2), (-2, 3), (1, 3)],
            weights=[2, 3, 99], hard=[False, False, True],
        )
        text = write_dimacs(f)
        assert text.splitlines()[0] == "p wcnf 3 3 6"
        assert text.splitlines()[3] == "6 1 3 0"
        # canonical output parses back with the hard weight normalized
        g = parse_dimacs(text)
        assert g.clauses[2].hard and g.clauses[2].weight == 6
        assert parse_dimacs(write_dimacs(g)) == g

    def test_weighted_soft_only_is_wcnf(self):
        f = CnfFormula.from_ints(2, [(1,), (2,)], weights=[1, 4])
        assert write_dimacs(f).startswith("p wcnf 2 2 6\n1 1 0\n4 2 0")


class TestCountUnsat:
    def test_example_formula_all_false(self, example_formula):
        # oracle: enumerate all 16 assignments, pick out the all-false row
        table = {}
        for bits in itertools.product([False, True], repeat=4):
            table[bits] = brute_unsat(example_formula, bits)
        assert count_unsat(example_formula, (False,) * 4) == table[(False,) * 4]
        assert table[(False,) * 4] == (0, 0)
        assert min(c for c, _ in table.values()) == 0  # satisfiable

    def test_single_clause_true(self):
        f = CnfFormula.from_ints(1, [(1,)])
        assert count_unsat(f, [True]) == (0, 0)

    def test_xor_block_all_false(self):
        from memsat.gen import XorEquation, XorSystem, xor_to_cnf

        block = xor_to_cnf(XorSystem(3, (XorEquation((1, 2, 3), True),)))
        for bits in itertools.product([False, True], repeat=3):
            expect = 0 if (bits[0] ^ bits[1] ^ bits[2]) else 1
            assert count_unsat(block, bits)[0] == expect
        assert count_unsat(block, (False, False, False))[0] == 1

    def test_agrees_with_independent_evaluator(self):
        rng = SplitMix64(5)
        for _ in range(25):
            n = 4 + rng.below(12)
            f = gen_random_e3sat(GenSpec("random_e3sat", n, 3.0, seed=rng.next_u64()))
            a = [rng.coin() for _ in range(n)]
            assert count_unsat(f, a) == brute_unsat(f, a)

    def test_weight_equals_count_when_unweighted(self):
        rng = SplitMix64(6)
        f = gen_random_e3sat(GenSpec("random_e3sat", 12, 4.0, seed=9))
        for _ in range(10):
            a = [rng.coin() for _ in range(12)]
            c, w = count_unsat(f, a)
            assert c == w

    def test_length_mismatch(self, example_formula):
        with pytest.raises(FormulaError):
            count_unsat(example_formula, [True, False])


class TestDistance:
    def test_identity(self):
        assert assignment_distance([True, False], [True, False]) == 0

    def test_single_flip(self):
        assert assignment_distance([True, False, True], [False, False, True]) == 1

    def test_maximal(self):
        assert assignment_distance([True] * 7, [False] * 7) == 7

    def test_metric_properties(self):
        rng = SplitMix64(77)
        for _ in range(50):
            n = 1 + rng.below(16)
            x = [rng.coin() for _ in range(n)]
            y = [rng.coin() for _ in range(n)]
            z = [rng.coin() for _ in range(n)]
            assert assignment_distance(x, x) == 0
            assert assignment_distance(x, y) == assignment_distance(y, x)
            assert (assignment_distance(x, z)
                    <= assignment_distance(x, y) + assignment_distance(y, z))

    def test_length_mismatch(self):
        with pytest.raises(FormulaError):
            assignment_distance([True], [True, False])


class TestTypes:
    def test_literal_validation(self):
        with pytest.raises(FormulaError):
            Literal(0)
        assert Literal.from_int(-3) == Literal(3, True)
        assert Literal(3, True).to_int() == -3

    def test_clause_rejects_repeated_variable(self):
        with pytest.raises(FormulaError):
            Clause.from_ints([1, -1])
        with pytest.raises(FormulaError):
            Clause.from_ints([2, 3, 2])

    def test_clause_rejects_empty_and_bad_weight(self):
        with pytest.raises(FormulaError):
            Clause(())
        with pytest.raises(FormulaError):
            Clause.from_ints([1], weight=0)

    def test_formula_rejects_out_of_range_literal(self):
        with pytest.raises(FormulaError):
            CnfFormula.from_ints(2, [(1, 3)])

    def test_immutable(self, example_formula):
        with pytest.raises(AttributeError):
            example_formula.num_variables = 7

    def test_duplicate_clauses_permitted(self):
        f = CnfFormula.from_ints(2, [(1, 2), (1, 2)])
        assert f.num_clauses == 2

    def test_density(self, example_formula):
        assert example_formula.density == 5 / 4
        assert example_formula.num_literals == 14


class TestEffectiveWeights:
    def test_unweighted_identity(self, example_formula):
        assert effective_weights(example_formula) == [1] * 5

    def test_hard_dominates_soft_neighbours(self):
        # hard clause shares variables with soft clauses of weights {2, 3}
        f = CnfFormula.from_ints(
            4, [(1, 2), (2, 3), (1, 4), (1, 2, 3)],
            weights=[2, 3, 5, 1], hard=[False, False, False, True],
        )
        w = effective_weights(f)
        assert w[:3] == [2, 3, 5]
        assert w[3] == 1 + 2 + 3 + 5  # shares x1 with c3 too
        assert w[3] > 2 + 3

    def test_hard_without_soft_neighbours(self):
        f = CnfFormula.from_ints(2, [(1,), (2,)], weights=[1, 10],
                                 hard=[False, True])
        assert effective_weights(f) == [1, 1]
