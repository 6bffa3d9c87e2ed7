from fractions import Fraction as F
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import LinearProgram, LPStatus, solve_lp, solve_lp_many


def test_equality_only():
    res = solve_lp(LinearProgram([0], A_eq=[[1]], b_eq=[1]))
    assert res.status is LPStatus.OPTIMAL and res.x == [1] and res.verify()


def test_simple_bound():
    res = solve_lp(LinearProgram([1], [[1]], [3]))
    assert res.objective == 3 and res.x == [3] and res.verify()


def test_farkas_textbook_certificate():
    res = solve_lp(LinearProgram([0], [[1], [-1]], [0, -1], free={0}))
    assert res.status is LPStatus.INFEASIBLE and res.verify()
    u = res.dual_ub
    assert u[0] == u[1] > 0


def test_unbounded_ray():
    res = solve_lp(LinearProgram([1, 1], [[1, -1]], [1]))
    assert res.status is LPStatus.UNBOUNDED and res.verify()


def test_degenerate_cycling_example():
    # Beale's example cycles under the naive rule
    c = [F(3, 4), -150, F(1, 50), -6]
    A = [[F(1, 4), -60, -F(1, 25), 9], [F(1, 2), -90, -F(1, 50), 3], [0, 0, 1, 0]]
    res = solve_lp(LinearProgram(c, A, [0, 0, 1]))
    assert res.objective == F(1, 20) and res.verify()


def test_many_objectives_are_independent():
    lp = LinearProgram([1, 0], [[1, 1], [1, -1]], [4, 2])
    r1, r2 = solve_lp_many(lp, [[1, 0], [0, 1]])
    assert r1.objective == 3 and r2.objective == 4
    assert r1.verify() and r2.verify()


def _brute_force(c, A, b):
    """Enumerate vertices of {x >= 0, Ax <= b} in two variables."""
    rows = [(list(a), F(bb)) for a, bb in zip(A, b)] + [([-1, 0], F(0)), ([0, -1], F(0))]
    best = None
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            (a1, b1), (a2, b2) = rows[i], rows[j]
            det = a1[0] * a2[1] - a1[1] * a2[0]
            if det == 0:
                continue
            x = (F(b1 * a2[1] - b2 * a1[1], det), F(a1[0] * b2 - a2[0] * b1, det))
            if all(r[0] * x[0] + r[1] * x[1] <= bb for r, bb in rows):
                val = c[0] * x[0] + c[1] * x[1]
                best = val if best is None else max(best, val)
    return best


@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 6)), min_size=1, max_size=5),
       st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_against_vertex_enumeration(rows, c):
    # a box keeps the problem bounded, so the optimum sits at a vertex
    A = [r[:2] for r in rows] + [(1, 0), (0, 1)]
    b = [r[2] for r in rows] + [5, 5]
    res = solve_lp(LinearProgram(list(c), A, b))
    assert res.verify()
    assert res.status is LPStatus.OPTIMAL  # x = 0 is feasible since b >= 0
    assert res.objective == _brute_force(c, A, b)


@given(st.integers(0, 10_000))
def test_random_certificates(seed):
    rng = random.Random(seed)
    n, m, k = rng.randint(1, 4), rng.randint(0, 4), rng.randint(0, 2)
    def row():
        return [F(rng.randint(-3, 3)) for _ in range(n)]
    lp = LinearProgram(row(), [row() for _ in range(m)], [F(rng.randint(-3, 3)) for _ in range(m)],
                       [row() for _ in range(k)], [F(rng.randint(-3, 3)) for _ in range(k)],
                       free={j for j in range(n) if rng.random() < 0.3})
    assert solve_lp(lp).verify()


def test_matches_scipy_on_random_problems():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = random.Random(11)
    for _ in range(60):
        n, m = rng.randint(2, 4), rng.randint(1, 5)
        A = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(m)]
        b = [rng.randint(0, 6) for _ in range(m)]
        c = [rng.randint(-3, 3) for _ in range(n)]
        A += [[1 if i == j else 0 for i in range(n)] for j in range(n)]
        b += [4] * n
        res = solve_lp(LinearProgram(c, A, b))
        ref = scipy_opt.linprog([-x for x in c], A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
        assert abs(float(res.objective) + ref.fun) < 1e-7
