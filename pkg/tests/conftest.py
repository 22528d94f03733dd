import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lqgbounds.model import build_instance  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def e1():
    """Scalar state feedback: a = 2, b = 1, unit costs and noise."""
    return build_instance([[2.0]], [[1.0]])


@pytest.fixture(scope="session")
def e_po():
    """Scalar over-actuated output feedback: a = 2, B = [1, 0], c = 1."""
    return build_instance([[2.0]], [[1.0, 0.0]], [[1.0]], mode="PartiallyObserved")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
