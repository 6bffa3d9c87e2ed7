from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import (
    AdaptedProcess,
    PredictableControl,
    ScenarioTree,
    big_jump_split,
    cadlag_modulus,
    covariation,
    doob_decomposition,
    integration_by_parts,
    jump_threshold,
    martingale_closure,
    slicing_times,
    stochastic_integral,
    variation,
)
from ftaplab.tree import TerminalVariable

from conftest import HALF, one_period, process_pairs, processes


@pytest.fixture
def S():
    return one_period([HALF, HALF], [2, HALF])


def test_integral_examples(S):
    tree = S.tree
    one = PredictableControl.constant(tree, 1)
    assert stochastic_integral(one, S) == S - S.initial()
    assert stochastic_integral(one * 0, S) == AdaptedProcess.constant(tree, 0)
    I = stochastic_integral(one, S)
    assert [I.scalar(w) for w in tree.leaves] == [1, -HALF]


def test_integral_dimension_mismatch(S):
    H = PredictableControl(S.tree, {0: (1, 1)})
    with pytest.raises(Exception):
        stochastic_integral(H, S)


def test_doob_examples(S):
    M, B = doob_decomposition(S)
    assert B.scalar(1) == B.scalar(2) == F(1, 4)
    assert M.is_martingale()
    tree = S.tree
    mart = martingale_closure(TerminalVariable(tree, {1: 3, 2: -1}))
    assert doob_decomposition(mart)[1] == AdaptedProcess.constant(tree, 0)
    det = AdaptedProcess(tree, {0: 0, 1: 5, 2: 5})
    M, B = doob_decomposition(det)
    assert M == AdaptedProcess.constant(tree, 0) and B == det


def test_big_jump_split_examples(S):
    dec = big_jump_split(S, F(3, 4))
    assert [dec.Xcheck.scalar(w) for w in S.tree.leaves] == [1, 0]
    assert dec.B.scalar(1) == -F(1, 4)
    assert not dec.check(S)
    big = big_jump_split(S, 5)
    M, B = doob_decomposition(S)
    assert big.Xcheck == AdaptedProcess.constant(S.tree, 0) and big.M == M and big.B == B
    zero = AdaptedProcess.constant(S.tree, 0)
    z = big_jump_split(zero, F(1, 7))
    assert z.B == z.M == z.Xcheck == zero
    with pytest.raises(ValueError):
        big_jump_split(S, 0)


def test_jump_threshold_rule(S):
    tree = S.tree
    assert jump_threshold(AdaptedProcess.constant(tree, 3)) == 1
    assert jump_threshold(S) == F(3, 4)
    unit = AdaptedProcess(tree, {0: 0, 1: 1, 2: -1})
    assert jump_threshold(unit) == HALF
    # the list form moves C off every magnitude of every member
    other = AdaptedProcess(tree, {0: 0, 1: F(3, 4), 2: -F(1, 8)})
    C = jump_threshold([S, other])
    assert C not in {F(3, 4), F(1, 8), F(1), HALF} and HALF < C < 1


def test_variations(S):
    Q = variation(S, "quadratic")
    assert [Q.scalar(w) for w in S.tree.leaves] == [1, F(1, 4)]
    T = variation(S)
    assert [T.scalar(w) for w in S.tree.leaves] == [1, HALF]
    assert variation(AdaptedProcess.constant(S.tree, 2)) == AdaptedProcess.constant(S.tree, 0)
    with pytest.raises(ValueError):
        variation(S, "cubic")


def test_covariation_examples(S):
    assert [covariation(S, S * 2).scalar(w) for w in S.tree.leaves] == [2, HALF]
    assert covariation(S, AdaptedProcess.constant(S.tree, 4)) == AdaptedProcess.constant(S.tree, 0)
    assert covariation(S, S) == variation(S, "quadratic")


def test_ibp_examples(S):
    a, b, c = integration_by_parts(S, S)
    assert a + b + c == S * S - S.scalar(0) ** 2
    assert a * 2 + c == S * S - 1
    one = AdaptedProcess.constant(S.tree, 1)
    a, b, c = integration_by_parts(S, one)
    zero = AdaptedProcess.constant(S.tree, 0)
    assert a == zero and b == S - 1 and c == zero


def test_cadlag_modulus_examples():
    assert cadlag_modulus([3, 3, 3, 3], F(1, 3)) == 0
    # jump at the interior grid point 2/3, both neighbouring cells of length >= delta
    assert cadlag_modulus([0, 0, 1, 1], F(1, 3)) == 0
    path = [0, 2, -1, 1]
    assert cadlag_modulus(path, F(1)) == 3
    with pytest.raises(ValueError):
        cadlag_modulus([], F(1, 2))


def test_slicing_time_examples():
    tree = ScenarioTree.from_branching([[HALF, HALF]] * 3)
    const = AdaptedProcess.constant(tree, 1)
    assert len(slicing_times(const, F(1, 2))) == 1
    walk = {tree.root: F(0)}
    for v in tree.internal:
        up, dn = tree.children(v)
        walk[up], walk[dn] = walk[v] + F(1, 4), walk[v] - F(1, 4)
    N = AdaptedProcess(tree, walk)
    taus = slicing_times(N, F(1, 4))
    assert len(taus) == 4
    for i, tau in enumerate(taus):
        assert all(tau.on_leaf(w) == i for w in tree.leaves)
    assert len(slicing_times(N, F(2))) == 1


@given(processes())
def test_split_reconstructs(X):
    C = jump_threshold(X)
    dec = big_jump_split(X, C)
    assert dec.reconstruct() == X - X.initial()
    assert not dec.check(X)
    assert not dec.collision


@given(processes())
def test_martingale_part_has_no_drift(X):
    M, _ = doob_decomposition(X)
    assert doob_decomposition(M)[1] == AdaptedProcess.constant(X.tree, 0)


@given(process_pairs())
def test_polarization(pair):
    X, Y = pair
    lhs = covariation(X, Y) * 2
    rhs = variation(X + Y, "quadratic") - variation(X, "quadratic") - variation(Y, "quadratic")
    assert lhs == rhs


@given(process_pairs())
def test_ibp_identity(pair):
    U, V = pair
    a, b, c = integration_by_parts(U, V)
    assert a + b + c == U * V - U.scalar(U.tree.root) * V.scalar(V.tree.root)


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=9), st.data())
def test_modulus_monotone(path, data):
    n = len(path) - 1
    k1 = data.draw(st.integers(1, n))
    k2 = data.draw(st.integers(k1, n))
    assert cadlag_modulus(path, F(k1, n)) <= cadlag_modulus(path, F(k2, n))


@given(processes())
def test_slicing_overshoot(N):
    eps = F(1, 2)
    tree = N.tree
    taus = slicing_times(N, eps)
    jump = max(abs(N.increment(v)[0]) for v in tree.ids)
    for prev, cur in zip(taus, taus[1:]):
        for w in tree.leaves:
            path = tree.path(w)
            t0, t1 = prev.on_leaf(w), cur.on_leaf(w)
            if t1 <= tree.horizon:
                assert abs(N.scalar(path[t1]) - N.scalar(path[t0])) <= eps + jump
