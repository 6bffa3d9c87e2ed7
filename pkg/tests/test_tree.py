from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import (
    AdaptedProcess,
    Node,
    PredictableControl,
    ScenarioTree,
    StoppingTimeSpec,
    TerminalVariable,
    TreeError,
    conditional_expectation,
    martingale_closure,
    stopped_process,
)

from conftest import HALF, one_period, processes, trees


def test_binomial_weighted_average():
    tree = ScenarioTree.from_branching([[HALF, HALF]])
    xi = TerminalVariable(tree, {1: 2, 2: HALF})
    assert conditional_expectation(tree, xi, 0) == {0: F(5, 4)}


def test_constant_and_terminal_conditioning():
    tree = ScenarioTree.from_branching([[F(1, 3), F(2, 3)], [HALF, HALF]])
    c = TerminalVariable.constant(tree, 7)
    for t in range(3):
        assert set(conditional_expectation(tree, c, t).values()) == {7}
    xi = TerminalVariable(tree, {w: w for w in tree.leaves})
    assert conditional_expectation(tree, xi, 2) == {w: w for w in tree.leaves}


def test_time_out_of_range():
    tree = ScenarioTree.from_branching([[HALF, HALF]])
    xi = TerminalVariable.constant(tree, 1)
    with pytest.raises(TreeError):
        conditional_expectation(tree, xi, 2)


@pytest.mark.parametrize("nodes, msg", [
    ([Node(0, None, 0, F(1)), Node(1, 0, 1, HALF), Node(2, 0, 1, F(1, 3))], "summing"),
    ([Node(0, None, 0, F(1)), Node(1, 0, 1, F(1)), Node(2, None, 0, F(1))], "one root"),
    ([Node(0, None, 0, F(1)), Node(1, 0, 1, F(0)), Node(2, 0, 1, F(1))], "positive"),
    ([Node(0, None, 0, F(1)), Node(1, 0, 2, F(1))], "time"),
    ([Node(0, None, 0, F(1)), Node(1, 0, 1, HALF), Node(2, 0, 1, HALF), Node(3, 1, 2, F(1))], "leaf before"),
])
def test_tree_invariants(nodes, msg):
    with pytest.raises(TreeError, match=msg):
        ScenarioTree(nodes)


def test_leaf_probabilities_sum_to_one():
    tree = ScenarioTree.from_branching([[F(1, 3), F(2, 3)], [F(1, 4), F(3, 4)]])
    assert sum(tree.prob(w) for w in tree.leaves) == 1
    assert tree.horizon == 2 and tree.leaves == (3, 4, 5, 6)


def test_horizon_zero_tree():
    tree = ScenarioTree([Node(0, None, 0, F(1))])
    assert tree.horizon == 0 and tree.leaves == (0,) and tree.internal == ()


def test_process_domains():
    tree = ScenarioTree.from_branching([[HALF, HALF]])
    with pytest.raises(TreeError):
        AdaptedProcess(tree, {0: 1, 1: 2})
    with pytest.raises(TreeError):
        PredictableControl(tree, {0: 1, 1: 1})
    assert PredictableControl(tree, {0: 1})[0] == (1,)


def test_stopped_process_examples():
    S = one_period([HALF, HALF], [2, HALF])
    tree = S.tree
    assert stopped_process(S, StoppingTimeSpec.never(tree)) == S
    frozen = stopped_process(S, StoppingTimeSpec.at_time(tree, 0))
    assert all(frozen.scalar(v) == 1 for v in tree.ids)


def test_stop_at_up_node_freezes_up_path():
    tree = ScenarioTree.from_branching([[HALF, HALF], [HALF, HALF]])
    vals = {0: 0, 1: 1, 2: -1, 3: 2, 4: 0, 5: 0, 6: -2}
    X = AdaptedProcess(tree, vals)
    Y = stopped_process(X, StoppingTimeSpec(tree, {1}))
    assert [Y.scalar(v) for v in tree.ids] == [0, 1, -1, 1, 1, 0, -2]
    tau = StoppingTimeSpec(tree, {1})
    assert tau.on_leaf(3) == 1 and tau.on_leaf(5) == tau.infinity == 3


@given(st.data())
def test_tower_property(data):
    tree = data.draw(trees())
    xi = TerminalVariable(tree, {w: F(data.draw(st.integers(-9, 9)), 3) for w in tree.leaves})
    t = data.draw(st.integers(0, tree.horizon))
    s = data.draw(st.integers(0, t))
    inner = conditional_expectation(tree, xi, t)
    # condition the time-t slice down to time s
    for v in tree.nodes_at(s):
        below = [u for u in tree.descendants(v) if tree.time(u) == t]
        avg = sum(tree.prob(u) * inner[u] for u in below) / tree.prob(v)
        assert avg == conditional_expectation(tree, xi, s)[v]


@given(st.data())
def test_closure_is_martingale_with_right_terminal(data):
    tree = data.draw(trees())
    xi = TerminalVariable(tree, {w: F(data.draw(st.integers(-9, 9)), 2) for w in tree.leaves})
    M = martingale_closure(xi)
    assert M.is_martingale()
    assert M.terminal() == xi
    assert M.scalar(tree.root) == xi.expectation()


@given(st.data())
def test_stopping_is_idempotent(data):
    X = data.draw(processes())
    tree = X.tree
    stop = data.draw(st.sets(st.sampled_from(tree.ids)))
    tau = StoppingTimeSpec(tree, stop)
    once = stopped_process(X, tau)
    assert stopped_process(once, tau) == once
