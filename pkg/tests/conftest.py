import pytest

from memsat.formula import CnfFormula


@pytest.fixture
def example_formula() -> CnfFormula:
    """Five 3-ish clauses over four variables, fourteen literals total;
    satisfiable (e.g. by the all-false assignment)."""
    return CnfFormula.from_ints(4, [
        (-1, 2),
        (-2, -3, 4),
        (1, -2, 3, -4),
        (-1, 4),
        (1, 2, -4),
    ])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
