"""Emery and ucp distances, L0 quantiles and P-UT profiles on a tree.

Vector-valued differences are measured in the max norm over components.

The Emery supremum runs over integrands ``K`` with ``|K| <= 1`` per cell
(an internal node and a coordinate).  A tree DP over the vertices of the
cube gives a certified lower bound; when the cap ``∧ 1`` can be active, a
best-first branch and bound over boxes supplies the matching upper bound.

P-UT profiles ``sup_H P[|(H.X)_T| >= a]`` are computed exactly.  Scalar
processes use a DP over the accumulated integral ``w``: the value function
of each node is a step function of ``w`` whose breakpoints are generated
from the children's breakpoints.  Vector processes use the sign-pattern
enumeration with an LP feasibility check per pattern.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Literal

from gmpy2 import mpq

from .lp import LinearProgram, LPStatus, solve_lp
from .tree import AdaptedProcess, PredictableControl, ScenarioTree, TerminalVariable, as_fraction

__all__ = [
    "DistanceResult", "PUTProfile", "ucp_distance", "emery_distance", "emery_objective",
    "l0_quantile", "tail_probability", "put_profile", "put_profile_sup", "put_value",
]

ONE = Fraction(1)
ZERO = Fraction(0)


def _norm(v) -> Fraction:
    return max(abs(a) for a in v)


def ucp_distance(X: AdaptedProcess, Y: AdaptedProcess) -> Fraction:
    """``E[sup_t |X_t - Y_t| ∧ 1]``."""
    X.tree.check_same(Y.tree)
    tree = X.tree
    D = X - Y
    return sum((tree.prob(w) * min(ONE, max(_norm(D[v]) for v in tree.path(w))) for w in tree.leaves), ZERO)


# -- Emery distance ----------------------------------------------------------

@dataclass(frozen=True)
class DistanceResult:
    value: Fraction  # certified lower bound
    error_bound: Fraction  # value + error_bound is a certified upper bound
    method: Literal["vertex-enumeration", "grid-certified"]
    witness: PredictableControl | None = field(default=None, compare=False)
    converged: bool = True

    @property
    def upper(self) -> Fraction:
        return self.value + self.error_bound


def emery_objective(K: PredictableControl, D: AdaptedProcess) -> Fraction:
    """``E[|(K . D)|^*_T ∧ 1]``."""
    tree = D.tree
    total = ZERO
    for w in tree.leaves:
        run, best = ZERO, ZERO
        path = tree.path(w)
        for v, c in zip(path, path[1:]):
            run += sum((k * x for k, x in zip(K[v], D.increment(c))), ZERO)
            best = max(best, abs(run))
        total += tree.prob(w) * min(ONE, best)
    return total


class _EmeryProblem:
    def __init__(self, D: AdaptedProcess):
        self.D = D
        self.tree = D.tree
        self.d = D.dim
        self.cells = [(v, i) for v in self.tree.internal for i in range(self.d)]
        self.cell_index = {c: k for k, c in enumerate(self.cells)}
        self.inc = {c: D.increment(c) for c in self.tree.ids}

    def vertex_dp(self, box) -> tuple[Fraction, dict[int, tuple[Fraction, ...]]]:
        """Exact max over the vertices of ``box``; returns value and integrand."""
        tree, d, idx = self.tree, self.d, self.cell_index

        def choices(v):
            # upper endpoint first so ties resolve towards the positive integrand
            opts = [sorted({box[idx[(v, i)]][0], box[idx[(v, i)]][1]}, reverse=True) for i in range(d)]
            return list(itertools.product(*opts))

        memo: dict = {}

        def F(v, w, m):
            key = (v, w, m)
            if key in memo:
                return memo[key][0]
            if tree.is_leaf(v):
                return min(ONE, m)
            best, arg = None, None
            for k in choices(v):
                val = ZERO
                for c in tree.children(v):
                    w2 = w + sum((a * b for a, b in zip(k, self.inc[c])), ZERO)
                    val += tree.cond_prob(c) * F(c, w2, max(m, abs(w2)))
                if best is None or val > best:
                    best, arg = val, k
            memo[key] = (best, arg)
            return best

        value = F(tree.root, ZERO, ZERO)
        K = {}
        stack = [(tree.root, ZERO, ZERO)]
        while stack:
            v, w, m = stack.pop()
            if tree.is_leaf(v):
                continue
            k = memo[(v, w, m)][1]
            K[v] = k
            for c in tree.children(v):
                w2 = w + sum((a * b for a, b in zip(k, self.inc[c])), ZERO)
                stack.append((c, w2, max(m, abs(w2))))
        for v in tree.internal:  # unreachable states never happen; keep K total
            K.setdefault(v, tuple(box[idx[(v, i)]][1] for i in range(d)))
        return value, K

    def upper(self, box) -> Fraction:
        """Sum over paths of the exact pathwise sup over the box, capped at 1."""
        tree, idx = self.tree, self.cell_index
        total = ZERO
        for w in tree.leaves:
            lo = hi = ZERO
            best = ZERO
            path = tree.path(w)
            for v, c in zip(path, path[1:]):
                for i, x in enumerate(self.inc[c]):
                    a, b = box[idx[(v, i)]]
                    lo += min(a * x, b * x)
                    hi += max(a * x, b * x)
                best = max(best, abs(lo), abs(hi))
                if best >= 1:
                    break
            total += tree.prob(w) * min(ONE, best)
        return total

    def split_cell(self, box) -> int:
        tree = self.tree
        best, arg = ZERO, 0
        for k, (v, i) in enumerate(self.cells):
            a, b = box[k]
            if a == b:
                continue
            weight = sum((tree.prob(c) * abs(self.inc[c][i]) for c in tree.children(v)), ZERO)
            score = (b - a) * weight
            if score > best:
                best, arg = score, k
        return arg


def emery_distance(X: AdaptedProcess, Y: AdaptedProcess, eps=Fraction(1, 1000),
                   max_boxes: int = 20000) -> DistanceResult:
    """Certified bounds on ``sup_{|K| <= 1} E[|(K . (X - Y))|^*_T ∧ 1]``."""
    X.tree.check_same(Y.tree)
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    tree = X.tree
    D = X - Y
    # canonical orientation makes the result exactly symmetric in (X, Y)
    flat = [a for v in tree.ids for a in D[v]]
    if [-a for a in flat] > flat:
        res = _emery(-D, eps, max_boxes)
        w = res.witness
        return DistanceResult(res.value, res.error_bound, res.method, -w if w is not None else None,
                              res.converged)
    return _emery(D, eps, max_boxes)


def _emery(D: AdaptedProcess, eps: Fraction, max_boxes: int) -> DistanceResult:
    tree = D.tree
    prob = _EmeryProblem(D)
    if not prob.cells:
        zero = PredictableControl.constant(tree, 0, D.dim)
        return DistanceResult(ZERO, ZERO, "vertex-enumeration", zero)
    cube = tuple((-ONE, ONE) for _ in prob.cells)
    lower, K = prob.vertex_dp(cube)
    witness = PredictableControl(tree, K, D.dim)
    tv = max(sum((sum(abs(a) for a in D.increment(c)) for c in tree.path(w)[1:]), ZERO) for w in tree.leaves)
    if tv <= 1:
        # no cap: the objective is convex in K, so a vertex is optimal
        return DistanceResult(lower, ZERO, "vertex-enumeration", witness)
    upper = prob.upper(cube)
    if upper == lower:
        return DistanceResult(lower, ZERO, "vertex-enumeration", witness)
    heap = [(-upper, 0, cube)]
    counter = 1
    while heap and counter < max_boxes:
        neg_ub, _, box = heapq.heappop(heap)
        if -neg_ub - lower <= eps:
            heapq.heappush(heap, (neg_ub, 0, box))
            break
        k = prob.split_cell(box)
        a, b = box[k]
        mid = (a + b) / 2
        for half in ((a, mid), (mid, b)):
            sub = box[:k] + (half,) + box[k + 1:]
            ub = prob.upper(sub)
            if ub <= lower:
                continue
            val, Ks = prob.vertex_dp(sub)
            if val > lower:
                lower, witness = val, PredictableControl(tree, Ks, D.dim)
            heapq.heappush(heap, (-ub, counter, sub))
            counter += 1
    upper = max([-h[0] for h in heap] + [lower])
    return DistanceResult(lower, upper - lower, "grid-certified", witness, upper - lower <= eps)


# -- L0 quantiles -------------------------------------------------------------

def tail_probability(xi: TerminalVariable, a, strict: bool = True) -> Fraction:
    """``P[|xi| > a]`` (or ``>=`` when ``strict`` is False)."""
    a = as_fraction(a)
    tree = xi.tree
    if strict:
        return sum((tree.prob(w) for w in tree.leaves if abs(xi[w]) > a), ZERO)
    return sum((tree.prob(w) for w in tree.leaves if abs(xi[w]) >= a), ZERO)


def l0_quantile(family: Sequence[TerminalVariable], eta) -> Fraction:
    """Smallest ``a >= 0`` with ``P[|xi| > a] <= eta`` for every member."""
    eta = as_fraction(eta)
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if not family:
        raise ValueError("empty family")
    out = ZERO
    for xi in family:
        tree = xi.tree
        cands = sorted({ZERO} | {abs(xi[w]) for w in tree.leaves})
        a = next(c for c in cands if tail_probability(xi, c) <= eta)
        out = max(out, a)
    return out


# -- P-UT profiles --------------------------------------------------------------

@dataclass(frozen=True)
class PUTProfile:
    a_grid: tuple[Fraction, ...]
    values: dict[Fraction, Fraction]
    family_size: int
    method: str = "dp"
    lower_bound_only: bool = False

    def __call__(self, a) -> Fraction:
        return self.values[as_fraction(a)]

    def is_valid(self) -> bool:
        vals = [self.values[a] for a in self.a_grid]
        return all(0 <= v <= 1 for v in vals) and all(x >= y for x, y in zip(vals, vals[1:]))


class _Step:
    """Upper-semicontinuous step function: values at breakpoints and on gaps."""

    __slots__ = ("bps", "pt", "iv")

    def __init__(self, bps, pt, iv):
        self.bps, self.pt, self.iv = bps, pt, iv

    def __call__(self, w):
        i = bisect.bisect_left(self.bps, w)
        if i < len(self.bps) and self.bps[i] == w:
            return self.pt[i]
        return self.iv[i]

    @classmethod
    def build(cls, points: list[Fraction], fn) -> _Step:
        """Sample ``fn`` at the points and between them, then merge equal pieces."""
        pts = sorted(set(points))
        if not pts:
            v = fn(ZERO)
            return cls([], [], [v])
        gaps = [pts[0] - 1] + [(x + y) / 2 for x, y in zip(pts, pts[1:])] + [pts[-1] + 1]
        iv = [fn(g) for g in gaps]
        pt = [fn(p) for p in pts]
        bps, opt, oiv = [], [], [iv[0]]
        for i, p in enumerate(pts):
            if pt[i] == oiv[-1] == iv[i + 1]:
                continue
            bps.append(p)
            opt.append(pt[i])
            oiv.append(iv[i + 1])
        return cls(bps, opt, oiv)


def _path_tv(X: AdaptedProcess) -> dict[int, Fraction]:
    tree = X.tree
    R = {tree.root: ZERO}
    for v in tree.internal:
        for c in tree.children(v):
            R[c] = R[v] + sum(abs(a) for a in X.increment(c))
    return R


_Q0, _Q1 = mpq(0), mpq(1)


def _dp_value(X: AdaptedProcess, a: Fraction, running_sup: bool) -> Fraction:
    """Exact ``sup_H P[|(H.X)_T| >= a]`` (or the running-sup version), scalar X.

    Internally in gmpy2 rationals for speed.
    """
    tree = X.tree
    R = _path_tv(X)
    if all(R[w] < a for w in tree.leaves):
        return ZERO
    a = mpq(a.numerator, a.denominator)
    inc = {}
    for c in tree.ids:
        x = X.increment(c)[0]
        inc[c] = mpq(x.numerator, x.denominator)
    cp = {c: mpq(tree.cond_prob(c).numerator, tree.cond_prob(c).denominator) for c in tree.ids}
    funcs: dict[int, _Step] = {}
    for w in tree.leaves:
        funcs[w] = _Step([-a, a], [_Q1, _Q1], [_Q1, _Q0, _Q1])
    for t in range(tree.horizon - 1, -1, -1):
        for v in tree.nodes_at(t):
            kids = tree.children(v)
            moving = [(cp[c], funcs[c], inc[c]) for c in kids if inc[c] != 0]
            still = [(cp[c], funcs[c]) for c in kids if inc[c] == 0]
            Rv = mpq(R[v].numerator, R[v].denominator)

            def value(w, moving=moving, still=still):
                if running_sup and abs(w) >= a:
                    return _Q1
                base = _Q0
                for q, f in still:
                    base += q * f(w)
                hs = {-_Q1, _Q1}
                for _, f, dl in moving:
                    for b in f.bps:
                        h = (b - w) / dl
                        if -1 < h < 1:
                            hs.add(h)
                hs = sorted(hs)
                cand = hs + [(x + y) / 2 for x, y in zip(hs, hs[1:])]
                best = _Q0
                for h in cand:
                    val = base
                    for q, f, dl in moving:
                        val += q * f(w + h * dl)
                    if val > best:
                        best = val
                return best

            pts = set()
            if running_sup:
                pts.update((-a, a))
            for _, f in still:
                pts.update(f.bps)
            for _, f, dl in moving:
                for b in f.bps:
                    pts.add(b - dl)
                    pts.add(b + dl)
            for (_, f1, d1), (_, f2, d2) in itertools.combinations(moving, 2):
                if d1 == d2:
                    continue
                for b1 in f1.bps:
                    for b2 in f2.bps:
                        pts.add((b1 * d2 - b2 * d1) / (d2 - d1))
            # only |w| <= Rv is reachable; pin the ends so outer gaps sample inside
            pts = [p for p in pts if -Rv < p < Rv] + [-Rv, Rv]
            funcs[v] = _Step.build(pts, value)
        for v in tree.nodes_at(t + 1):
            del funcs[v]
    out = funcs[tree.root](_Q0)
    return Fraction(int(out.numerator), int(out.denominator))


def _vertex_value(X: AdaptedProcess, a: Fraction) -> Fraction:
    """``max`` over vertex integrands of ``P[|(H.X)_T| >= a]`` by a forward-state DP."""
    tree = X.tree

    @lru_cache(maxsize=None)
    def F(v, w):
        if tree.is_leaf(v):
            return ONE if abs(w) >= a else ZERO
        best = ZERO
        for k in itertools.product((-ONE, ONE), repeat=X.dim):
            val = sum((tree.cond_prob(c) * F(c, w + sum((x * y for x, y in zip(k, X.increment(c))), ZERO))
                       for c in tree.children(v)), ZERO)
            best = max(best, val)
        return best

    return F(tree.root, ZERO)


def _enum_value(X: AdaptedProcess, a: Fraction, budget: int) -> tuple[Fraction, bool]:
    """Sign-pattern branch and bound; returns (value, exact)."""
    tree = X.tree
    d = X.dim
    R = _path_tv(X)
    live = sorted((w for w in tree.leaves if R[w] >= a), key=lambda w: -tree.prob(w))
    if not live:
        return ZERO, True
    cells = [(v, i) for v in tree.internal for i in range(d)]
    index = {c: k for k, c in enumerate(cells)}
    n = len(cells)
    rows_of = {}
    for w in live:
        row = {}
        path = tree.path(w)
        for v, c in zip(path, path[1:]):
            for i, x in enumerate(X.increment(c)):
                if x:
                    row[index[(v, i)]] = x
        rows_of[w] = row
    box_rows, box_rhs = [], []
    for k in range(n):
        box_rows += [{k: ONE}, {k: -ONE}]
        box_rhs += [ONE, ONE]

    calls = 0

    def feasible(assign) -> bool:
        nonlocal calls
        calls += 1
        rows = list(box_rows)
        rhs = list(box_rhs)
        for w, s in assign:
            rows.append({k: -s * x for k, x in rows_of[w].items()})
            rhs.append(-a)
        res = solve_lp(LinearProgram([0] * n, rows, rhs, free=frozenset(range(n))))
        return res.status is LPStatus.OPTIMAL

    suffix = [ZERO] * (len(live) + 1)
    for i in range(len(live) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + tree.prob(live[i])
    best = ZERO
    exhausted = False

    def dfs(i, assign, p):
        nonlocal best, exhausted
        if p > best:
            best = p
        if i == len(live) or p + suffix[i] <= best:
            return
        if calls >= budget:
            exhausted = True
            return
        w = live[i]
        signs = (1,) if not assign else (1, -1)
        for s in signs:
            nxt = assign + [(w, s)]
            if feasible(nxt):
                dfs(i + 1, nxt, p + tree.prob(w))
        dfs(i + 1, assign, p)

    dfs(0, [], ZERO)
    return best, not exhausted


def put_value(X: AdaptedProcess, a, running_sup: bool = False, method: str = "auto",
              budget: int = 3 ** 12) -> tuple[Fraction, bool]:
    """One process, one level: ``(value, exact)``."""
    a = as_fraction(a)
    if a <= 0:
        raise ValueError("levels must be positive")
    if method == "auto":
        method = "dp" if X.dim == 1 else "enumeration"
    if method == "dp":
        if X.dim != 1:
            raise ValueError("the DP method handles scalar processes")
        return _dp_value(X, a, running_sup), True
    if method != "enumeration":
        raise ValueError(f"unknown method {method!r}")
    # the stopping argument makes the running-sup and terminal values equal
    val, exact = _enum_value(X, a, budget)
    if not exact:
        val = max(val, _vertex_value(X, a))
    return val, exact


def _profile(family, a_grid, running_sup, method, budget) -> PUTProfile:
    family = list(family)
    if not family:
        raise ValueError("empty family")
    grid = tuple(as_fraction(a) for a in a_grid)
    if not grid or any(a <= 0 for a in grid) or list(grid) != sorted(set(grid)):
        raise ValueError("grid must be increasing positive rationals")
    tree = family[0].tree
    for X in family:
        X.tree.check_same(tree)
    values, exact = {}, True
    for a in grid:
        best = ZERO
        for X in family:
            v, ok = put_value(X, a, running_sup, method, budget)
            exact &= ok
            best = max(best, v)
        values[a] = best
    used = method if method != "auto" else ("dp" if all(X.dim == 1 for X in family) else "enumeration")
    return PUTProfile(grid, values, len(family), used, not exact)


def put_profile(family: Iterable[AdaptedProcess], a_grid: Iterable, method: str = "auto",
                budget: int = 3 ** 12) -> PUTProfile:
    """``a -> sup_n sup_{|H| <= 1} P[|(H . X^n)_T| >= a]``."""
    return _profile(family, a_grid, False, method, budget)


def put_profile_sup(family: Iterable[AdaptedProcess], a_grid: Iterable, method: str = "auto",
                    budget: int = 3 ** 12) -> PUTProfile:
    """Running-maximum variant ``sup P[|(H . X^n)|^*_T >= a]``."""
    return _profile(family, a_grid, True, method, budget)
