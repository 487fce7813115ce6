import numpy as np
import pytest

from pdsr.federation import PlatformDataset
from pdsr.graph import SimilarityGraph

# (criterion, passed, detail) rows printed after the run
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []

# edges of the 13-vertex example graph used for the expansion-ratio check
THIRTEEN_EDGES = [
    (0, 3), (1, 3), (2, 3), (0, 4), (1, 5), (2, 6), (2, 7),
    (8, 4), (8, 9), (12, 10), (12, 11),
]


@pytest.fixture
def report():
    def _record(name: str, passed: bool, detail: str = ""):
        ACCEPTANCE_LINES.append((name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {name} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_platforms(rng, m=40, users=(6, 9), density=0.5):
    """Platforms over a shared catalogue of m services with sparse values in (0, 1]."""
    out, start = [], 0
    for pid, n in enumerate(users, start=1):
        qos = rng.uniform(0.05, 1.0, (m, n)) * (rng.random((m, n)) < density)
        out.append(PlatformDataset(pid, np.arange(start, start + n), qos))
        start += n
    return out


def random_graph(rng, m, p=0.15):
    upper = np.triu(rng.random((m, m)) < p, 1)
    edges = list(zip(*np.nonzero(upper)))
    return SimilarityGraph.from_edges(m, edges)


@pytest.fixture
def platforms(rng):
    return random_platforms(rng)


@pytest.fixture
def thirteen():
    return SimilarityGraph.from_edges(13, THIRTEEN_EDGES)
