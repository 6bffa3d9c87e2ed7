from fractions import Fraction as F
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import (AdaptedProcess, ConeViolation, MarketModel, ModelParams, NoDominatingElement,
                     PredictableControl, ScenarioTree, TerminalVariable, check_na, check_nflvr, check_nupbr,
                     concatenate, esm_exists, fork_concatenate, generate_random_model, maximal_element,
                     random_admissible_sequence, terminal_cone_generators, wealth)

from conftest import HALF, one_period


def const(tree, x, dim=1):
    return PredictableControl.constant(tree, x, dim)


def two_period_binomial():
    tree = ScenarioTree.from_branching([[HALF, HALF], [HALF, HALF]])
    S = {0: 4, 1: 8, 2: 2, 3: 16, 4: 4, 5: 4, 6: 1}
    return MarketModel(AdaptedProcess(tree, {v: F(x) for v, x in S.items()}))


class TestWealth:
    def test_zero(self, binomial):
        w = wealth(binomial, const(binomial.tree, 0))
        assert w.admissible and all(w.wealth.scalar(v) == 0 for v in binomial.tree.ids)

    def test_unit_position(self, binomial):
        w = wealth(binomial, const(binomial.tree, 1))
        assert w.terminal.as_dict() == {1: 1, 2: -HALF} and w.admissible

    def test_floor_breached(self, binomial):
        w = wealth(binomial, const(binomial.tree, 3))
        assert w.terminal.as_dict() == {1: 3, 2: -F(3, 2)} and not w.admissible

    def test_cone_violation_names_node(self, no_trading):
        with pytest.raises(ConeViolation) as exc:
            wealth(no_trading, const(no_trading.tree, 1))
        assert exc.value.node == 0


class TestArbitrage:
    def test_binomial_holds(self, binomial):
        assert check_na(binomial).holds and check_nupbr(binomial).holds
        v = check_nflvr(binomial)
        assert v.holds and v.esm.exists

    def test_up_or_flat_certificate(self, up_or_flat):
        res = check_na(up_or_flat)
        assert not res.holds and res.certificate.verify(up_or_flat)
        assert res.certificate.strategy[0][0] > 0
        v = check_nflvr(up_or_flat)
        assert not v.holds and not v.esm.exists

    def test_deterministic_up_move_fails_nupbr(self):
        S = one_period([F(1)], [2])
        m = MarketModel(S)
        res = check_nupbr(m)
        assert not res.holds and res.certificate.kind == "NUPBR-violation"
        assert res.certificate.verify(m)
        assert all(res.certificate.wealth.scalar(v) >= 0 for v in m.tree.ids)

    def test_no_trading(self, no_trading):
        assert check_na(no_trading).holds and check_nupbr(no_trading).holds
        assert check_nflvr(no_trading).holds

    @given(st.integers(0, 10_000), st.integers(1, 3), st.sampled_from([0.0, 0.5]))
    def test_certificates_verify(self, seed, depth, density):
        m = generate_random_model(seed, ModelParams(depth=depth, branching=2, constraint_density=density))
        for res in (check_na(m), check_nupbr(m)):
            assert res.holds or res.certificate.verify(m)

    @given(st.integers(0, 10_000), st.integers(1, 2), st.integers(1, 2))
    def test_na_implies_nupbr_unconstrained(self, seed, depth, dim):
        m = generate_random_model(seed, ModelParams(depth=depth, branching=3, dim=dim))
        if check_na(m).holds:
            assert check_nupbr(m).holds

    @given(st.integers(0, 10_000))
    def test_ftap_route_agreement(self, seed):
        m = generate_random_model(seed, ModelParams(depth=2, dim=2, constraint_density=0.5))
        assert check_nflvr(m).holds == esm_exists(m).exists


class TestTerminalPolyhedron:
    def test_binomial_endpoints(self, binomial):
        P = terminal_cone_generators(binomial)
        assert P.form == "explicit" and not P.rays
        pts = sorted(tuple(v[w] for w in P.leaves) for v in P.vertices)
        assert pts == [(-1, HALF), (2, -1)]

    def test_no_trading(self, no_trading):
        P = terminal_cone_generators(no_trading)
        assert [tuple(v[w] for w in P.leaves) for v in P.vertices] == [(0, 0)]

    def test_zero_floor(self, binomial):
        P = terminal_cone_generators(binomial.with_floor(0))
        assert [tuple(v[w] for w in P.leaves) for v in P.vertices] == [(0, 0)]

    def test_zero_floor_long_only_gains(self):
        m = MarketModel(one_period([HALF, HALF], [2, 1]), floor=0)
        P = terminal_cone_generators(m)
        assert [tuple(r[w] for w in P.leaves) for r in P.rays] == [(1, 0)]


class TestMaximal:
    def test_no_trading_floor(self, no_trading):
        f = TerminalVariable(no_trading.tree, {1: -1, 2: -1})
        me = maximal_element(no_trading, f)
        assert me.h0.as_dict() == {1: 0, 2: 0} and me.verified

    def test_no_trading_positive_target(self, no_trading):
        with pytest.raises(NoDominatingElement):
            maximal_element(no_trading, TerminalVariable(no_trading.tree, {1: 1, 2: 0}))

    def test_complete_binomial_zero(self, binomial):
        me = maximal_element(binomial, TerminalVariable(binomial.tree, {1: 0, 2: 0}))
        assert me.h0.as_dict() == {1: 0, 2: 0} and me.verified

    @given(st.integers(0, 10_000))
    def test_dominates_admissible_wealth(self, seed):
        m = generate_random_model(seed, ModelParams(depth=2, branching=2, emm_first=True))
        est = esm_exists(m)
        (X,) = random_admissible_sequence(m, random.Random(seed), 1)
        me = maximal_element(m, X.terminal)
        assert me.verified
        assert all(me.h0[w] >= X.terminal[w] for w in m.tree.leaves)
        # complete binary markets: the EMM prices h0 at zero
        assert est.measure.expectation(me.h0) == 0


class TestConcatenation:
    def test_fork_empty_set_and_horizon(self):
        m = two_period_binomial()
        X = wealth(m, const(m.tree, F(1, 8)))
        cash = wealth(m, const(m.tree, 0))
        assert fork_concatenate(m, X, cash, 1, []).wealth == X.wealth
        assert fork_concatenate(m, X, cash, 2, [3, 4, 5, 6]).wealth == X.wealth

    def test_fork_freezes_on_up_node(self):
        m = two_period_binomial()
        X = wealth(m, const(m.tree, F(1, 8)))
        cash = wealth(m, const(m.tree, 0))
        Y = fork_concatenate(m, X, cash, 1, [1])
        assert Y.wealth.scalar(3) == Y.wealth.scalar(4) == X.wealth.scalar(1) == F(1, 2)
        assert Y.wealth.scalar(5) == X.wealth.scalar(5)
        assert Y.admissible

    def test_fork_rejects_wrong_time(self):
        m = two_period_binomial()
        X = wealth(m, const(m.tree, 0))
        with pytest.raises(ValueError):
            fork_concatenate(m, X, X, 1, [3])

    @given(st.integers(0, 10_000))
    def test_fork_convexity(self, seed):
        m = generate_random_model(seed, ModelParams(depth=2, branching=2))
        rng = random.Random(seed)
        X, Xt = random_admissible_sequence(m, rng, 2)
        if any(Xt.value.scalar(v) <= 0 for v in m.tree.ids):
            Xt = wealth(m, Xt.strategy * HALF)
        A = [v for v in m.tree.nodes_at(1) if rng.random() < 0.5]
        assert fork_concatenate(m, X, Xt, 1, A).admissible

    def test_concatenate_examples(self):
        m = two_period_binomial()
        tree = m.tree
        X = wealth(m, const(tree, F(1, 8)))
        Y = wealth(m, const(tree, -F(1, 8)))
        assert concatenate(m, const(tree, 1), const(tree, 0), X, Y).wealth == X.wealth
        assert all(concatenate(m, const(tree, 0), const(tree, 0), X, Y).wealth.scalar(v) == 0 for v in tree.ids)
        H = PredictableControl(tree, {0: (1,), 1: (0,), 2: (0,)})
        G = PredictableControl(tree, {0: (0,), 1: (1,), 2: (1,)})
        Z = concatenate(m, H, G, X, Y)
        # first period from X, second from Y
        assert Z.wealth.scalar(3) == X.wealth.scalar(1) + (Y.wealth.scalar(3) - Y.wealth.scalar(1))

    def test_concatenate_rejects_overlap(self):
        m = two_period_binomial()
        X = wealth(m, const(m.tree, 0))
        with pytest.raises(ValueError):
            concatenate(m, const(m.tree, 1), const(m.tree, 1), X, X)
