import networkx as nx
import pytest
from hypothesis import strategies as st

from consensus_nids.topology import from_edges, make_random


def to_networkx(t):
    g = nx.Graph()
    g.add_nodes_from(range(t.n))
    g.add_edges_from(t.edges)
    return g


def path3():
    return from_edges(3, [(0, 1), (1, 2)])


def k2():
    return from_edges(2, [(0, 1)])


def star4():
    return from_edges(4, [(0, 1), (0, 2), (0, 3)])


@st.composite
def connected_graphs(draw, min_n=2, max_n=25):
    n = draw(st.integers(min_n, max_n))
    m = draw(st.integers(n - 1, n * (n - 1) // 2))
    seed = draw(st.integers(0, 2**32 - 1))
    return make_random(n, m, seed)


@pytest.fixture
def petersen():
    from consensus_nids.topology import make_petersen

    return make_petersen()


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """``acceptance(k, ok, detail)`` records one criterion line for the summary."""

    def record(k, ok, detail=""):
        ACCEPTANCE_LINES.append(f"ACCEPTANCE {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
