import pytest

from hybridjoin.datasets import ASYMMETRIC_TRIANGLE, DIAMOND_X, g0, shape


def labelled(edges):
    """Query over G0's labels: every vertex P, every edge E."""
    m = max(max(e) for e in edges)
    return shape(edges, vertex_labels={i: "P" for i in range(1, m + 1)}, edge_labels=["E"] * len(edges))


@pytest.fixture
def G0():
    return g0()


@pytest.fixture
def triangle_q():
    return labelled(ASYMMETRIC_TRIANGLE)


@pytest.fixture
def diamond_q():
    return labelled(DIAMOND_X)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record(key: str, line: str) -> None:
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split(".")[0]), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
