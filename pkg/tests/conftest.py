import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lightdic.graph import DirectedGraph, generate_random_digraph

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def digraphs(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4 * n))
    src = [u for u, _ in pairs]
    dst = [v for _, v in pairs]
    return DirectedGraph.from_edges(n, src, dst)


qs = st.sampled_from([0.0, 0.05, 0.1, 0.2, 0.25])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def single_edge():
    return DirectedGraph.from_edges(2, [0], [1])


@pytest.fixture
def small_graph():
    return generate_random_digraph(20, 60, seed=5)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
