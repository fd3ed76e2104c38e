import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riemplan.bvp import shoot  # noqa: E402
from riemplan.scenario import build_scenario, fixture_path, parse_scenario  # noqa: E402

ACCEPTANCE_LINES = []


class SolvedFixture:
    def __init__(self, name):
        self.scenario = build_scenario(parse_scenario(fixture_path(name)))
        t0 = time.perf_counter()
        self.solution = shoot(self.scenario)
        self.wall = time.perf_counter() - t0


_solved = {}


def solved(name):
    """Solve a shipped scenario once per session."""
    if name not in _solved:
        _solved[name] = SolvedFixture(name)
    return _solved[name]


@pytest.fixture(scope="session")
def se2_two_agents():
    return solved("se2_two_agents")


@pytest.fixture(scope="session")
def sphere_two_agents():
    return solved("sphere_two_agents")


@pytest.fixture(scope="session")
def se2_circle_target():
    return solved("se2_circle_target")


@pytest.fixture(scope="session")
def sphere_latitude():
    return solved("sphere_latitude")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
