import numpy as np
import pytest

from halfline_threshold.potential import boundary_condition_potential, rank_k_potential
from halfline_threshold.threshold import analyze, generate_fixture

ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def second_kind():
    return rank_k_potential([[np.sqrt(2.0), -1.0 / np.sqrt(2.0)]], [[-1.0]])


@pytest.fixture(scope="session")
def third_kind():
    return generate_fixture("ThirdKind", 0)


@pytest.fixture(scope="session")
def alpha_half():
    return boundary_condition_potential(0.5)


@pytest.fixture(scope="session")
def alpha_one():
    return boundary_condition_potential(1.0)
