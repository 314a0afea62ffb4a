import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from partfilt.graph import from_edges

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def graphs(draw, min_n=1, max_n=24, with_features=False):
    """Random simple graphs, possibly disconnected, with optional features."""
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**31 - 1))
    p = draw(st.floats(0.0, 0.6))
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    X = rng.standard_normal((n, draw(st.integers(1, 3)))) if with_features else None
    return from_edges(n, np.column_stack([iu[keep], ju[keep]]), X)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def path_graph(n, features=None):
    return from_edges(n, [(i, i + 1) for i in range(n - 1)], features)


def cycle_graph(n, features=None):
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)], features)


# one status line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
