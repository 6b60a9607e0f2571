import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spdist.blocks import BlockParams, ConstraintCoupledBlock  # noqa: E402
from spdist.diagnostics import solve_cc_active_set  # noqa: E402
from spdist.graph import erdos_renyi, metropolis_weights  # noqa: E402
from spdist.problems import generate_quadratic_cc  # noqa: E402


def cc_setup(seed):
    problem = generate_quadratic_cc(10, 2, 2, seed)
    graph = erdos_renyi(10, 0.3, seed)
    W = metropolis_weights(graph)
    block = ConstraintCoupledBlock(problem, BlockParams(gamma=0.1, nu=1.0, rho=0.9))
    sol = solve_cc_active_set(problem)
    return problem, graph, W, block, sol, block.reference(sol)


@pytest.fixture(scope="session")
def cc0():
    return cc_setup(0)


def pytest_terminal_summary(terminalreporter):
    import acceptance_report
    if acceptance_report.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_report.summary_lines():
            terminalreporter.write_line(line)
