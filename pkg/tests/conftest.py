from fractions import Fraction as F

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ftaplab import AdaptedProcess, MarketModel, ScenarioTree

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

HALF = F(1, 2)


def one_period(p, values, s0=1):
    tree = ScenarioTree.from_branching([p])
    vals = {0: F(s0)}
    vals.update({i + 1: F(v) for i, v in enumerate(values)})
    return AdaptedProcess(tree, vals)


@pytest.fixture
def binomial():
    """S_0 = 1, S_1 in {2, 1/2} with p = 1/2."""
    return MarketModel(one_period([HALF, HALF], [2, HALF]))


@pytest.fixture
def up_or_flat():
    return MarketModel(one_period([HALF, HALF], [2, 1]))


@pytest.fixture
def no_trading():
    S = one_period([HALF, HALF], [2, HALF])
    return MarketModel(S, {0: []})


@st.composite
def trees(draw, max_depth=3, max_branch=3):
    depth = draw(st.integers(1, max_depth))
    edges = [(0, None, 1)]
    frontier, nid = [0], 1
    for _ in range(depth):
        nxt = []
        for v in frontier:
            k = draw(st.integers(2, max_branch))
            w = draw(st.lists(st.integers(1, 5), min_size=k, max_size=k))
            for a in w:
                edges.append((nid, v, F(a, sum(w))))
                nxt.append(nid)
                nid += 1
        frontier = nxt
    return ScenarioTree.from_edges(edges)


@st.composite
def processes(draw, tree=None, dim=1, lo=-4, hi=4):
    if tree is None:
        tree = trees()
    if isinstance(tree, st.SearchStrategy):
        tree = draw(tree)
    vals = {v: tuple(F(draw(st.integers(lo, hi)), 2) for _ in range(dim)) for v in tree.ids}
    return AdaptedProcess(tree, vals)


@st.composite
def process_pairs(draw, dim=1):
    tree = draw(trees(max_depth=2))
    return draw(processes(tree, dim)), draw(processes(tree, dim))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
