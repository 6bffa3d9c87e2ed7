from fractions import Fraction as F
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import (AdaptedProcess, PredictableControl, ScenarioTree, TerminalVariable, emery_distance,
                     emery_objective, l0_quantile, put_profile, put_profile_sup, put_value, ucp_distance,
                     variation)

from conftest import HALF, one_period, process_pairs, processes, trees


def zero_on(tree):
    return AdaptedProcess.constant(tree, 0)


class TestUcp:
    def test_identical(self):
        X = one_period([HALF, HALF], [2, 0])
        assert ucp_distance(X, X) == 0

    def test_capped(self):
        X = one_period([HALF, HALF], [5, -3], s0=2)
        assert ucp_distance(X, zero_on(X.tree)) == 1

    def test_binomial_gap(self):
        X = one_period([HALF, HALF], [HALF, 0], s0=0)
        assert ucp_distance(X, zero_on(X.tree)) == F(1, 4)

    @given(process_pairs())
    def test_symmetric_and_bounded(self, pair):
        X, Y = pair
        d = ucp_distance(X, Y)
        assert d == ucp_distance(Y, X) and 0 <= d <= 1


class TestEmery:
    def test_identical(self):
        X = one_period([HALF, HALF], [2, 0])
        res = emery_distance(X, X)
        assert res.value == 0 and res.error_bound == 0

    @pytest.mark.parametrize("c", [F(1, 3), F(-2, 3), F(5, 2), F(-7)])
    def test_deterministic_jump(self, c):
        X = one_period([HALF, HALF], [c, c], s0=0)
        res = emery_distance(X, zero_on(X.tree))
        assert res.value == min(abs(c), 1) and res.upper == res.value
        assert res.witness[0] == (1 if c > 0 else -1,)

    def test_rejects_nonpositive_eps(self):
        X = one_period([HALF, HALF], [1, 0])
        with pytest.raises(ValueError):
            emery_distance(X, X, 0)

    @given(process_pairs())
    def test_symmetry(self, pair):
        X, Y = pair
        assert emery_distance(X, Y, F(1, 50), 200) == emery_distance(Y, X, F(1, 50), 200)

    @given(process_pairs())
    def test_unit_integrand_is_below(self, pair):
        X, Y = pair
        tree = X.tree
        K = PredictableControl.constant(tree, 1)
        res = emery_distance(X, Y, F(1, 50), 200)
        assert emery_objective(K, X - Y) <= res.value <= res.upper
        # the witness realizes the lower bound
        assert emery_objective(res.witness, X - Y) == res.value

    @given(st.data())
    def test_triangle(self, data):
        tree = data.draw(trees(max_depth=2, max_branch=2))
        X, Y, Z = (data.draw(processes(tree)) for _ in range(3))
        d = lambda a, b: emery_distance(a, b, F(1, 50), 200)  # noqa: E731
        assert d(X, Z).value <= d(X, Y).upper + d(Y, Z).upper

    @given(processes(trees(max_depth=2, max_branch=2)))
    def test_upper_bound_dominates_grid(self, X):
        # sampling K on a grid can never beat the certified upper bound
        tree = X.tree
        D = X - zero_on(tree)
        res = emery_distance(X, zero_on(tree), F(1, 50), 200)
        cells = tree.internal
        grid = (-1, -HALF, 0, HALF, 1)
        if len(cells) > 3:
            return
        for ks in itertools.product(grid, repeat=len(cells)):
            K = PredictableControl(tree, {v: (k,) for v, k in zip(cells, ks)})
            assert emery_objective(K, D) <= res.upper


class TestQuantile:
    def xi(self):
        tree = ScenarioTree.from_branching([[HALF, HALF]])
        return TerminalVariable(tree, {1: 2, 2: 0})

    def test_zero_family(self):
        tree = ScenarioTree.from_branching([[HALF, HALF]])
        z = TerminalVariable(tree, {1: 0, 2: 0})
        assert l0_quantile([z], F(1, 4)) == 0 and l0_quantile([z], F(3, 4)) == 0

    def test_examples(self):
        assert l0_quantile([self.xi()], F(1, 4)) == 2
        assert l0_quantile([self.xi()], HALF) == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            l0_quantile([], HALF)
        with pytest.raises(ValueError):
            l0_quantile([self.xi()], 1)


def step(q, scale):
    """One step: jump of size ``scale`` with probability ``q``, else 0."""
    return one_period([q, 1 - q], [scale, 0], s0=0)


class TestProfile:
    GRID = (F(1, 2), F(1), F(2), F(4))

    def test_zero_family(self):
        tree = ScenarioTree.from_branching([[HALF, HALF], [HALF, HALF]])
        for fn in (put_profile, put_profile_sup):
            prof = fn([zero_on(tree)], self.GRID)
            assert all(prof(a) == 0 for a in self.GRID)

    def test_bounded_integrals(self):
        X = one_period([HALF, HALF], [F(3, 2), F(1, 2)], s0=1)  # |H.X| <= 1/2
        prof = put_profile([X], (F(1, 2), F(3, 4), F(1)))
        assert prof(F(1, 2)) == 1 and prof(F(3, 4)) == 0 and prof(1) == 0

    def test_scaled_family(self):
        q = F(1, 3)
        prof = put_profile([step(q, 1), step(q, 2)], (F(3, 2),))
        assert prof(F(3, 2)) == q
        assert put_profile([step(q, 1)], (F(3, 2),))(F(3, 2)) == 0

    def test_single_step_sup_equals_terminal(self):
        X = one_period([HALF, HALF], [2, HALF])
        assert put_profile([X], self.GRID).values == put_profile_sup([X], self.GRID).values

    def test_grid_validation(self):
        X = step(HALF, 1)
        with pytest.raises(ValueError):
            put_profile([X], (F(2), F(1)))
        with pytest.raises(ValueError):
            put_profile([], (F(1),))

    @given(processes(trees(max_depth=2, max_branch=3)))
    def test_valid_and_dominated(self, X):
        p1, p2 = put_profile([X], self.GRID), put_profile_sup([X], self.GRID)
        assert p1.is_valid() and p2.is_valid()
        assert all(p1(a) <= p2(a) for a in self.GRID)

    @given(st.data())
    def test_family_extension(self, data):
        tree = data.draw(trees(max_depth=2))
        X, Y = data.draw(processes(tree)), data.draw(processes(tree))
        small, big = put_profile([X], self.GRID), put_profile([X, Y], self.GRID)
        assert all(small(a) <= big(a) for a in self.GRID)

    @given(processes(trees(max_depth=2, max_branch=2)), st.sampled_from([F(1, 2), F(1), F(3, 2), F(3)]),
           st.booleans())
    def test_dp_matches_enumeration(self, X, a, sup):
        dp, _ = put_value(X, a, sup, method="dp")
        enum, exact = put_value(X, a, sup, method="enumeration")
        assert exact and dp == enum

    @given(processes(trees(max_depth=3, max_branch=2)), st.sampled_from([F(1, 2), F(1), F(2)]))
    def test_l0_bounds_from_sup_profile(self, X, a):
        """A sup-profile bound at level a bounds the quantiles of |X - X0|* and [X, X]."""
        tree = X.tree
        eta = put_profile_sup([X], (a,))(a)
        if not 0 < eta < HALF:
            return
        x0 = X.scalar(tree.root)
        run = TerminalVariable(tree, {w: max(abs(X.scalar(v) - x0) for v in tree.path(w)) for w in tree.leaves})
        qv = variation(X, "quadratic").terminal()
        assert l0_quantile([run], eta) <= a
        assert l0_quantile([qv], 2 * eta) <= 3 * a * a
