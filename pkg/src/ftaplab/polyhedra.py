"""Exact polyhedral projection and vertex/ray enumeration.

Polyhedra are stored in H-form ``{x : A x <= b, E x = f}`` with Fraction
entries and dense rows.  Projection eliminates variables by Gaussian
elimination on equalities first and Fourier-Motzkin on the rest.  Both
routines accept a budget and raise :class:`BudgetExceeded` instead of
running away; callers fall back to an implicit (LP-oracle) description.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .lp import LinearProgram, LPStatus, solve_lp

__all__ = ["HPolyhedron", "BudgetExceeded", "project", "enumerate_vertices", "rank"]

Row = tuple[Fraction, ...]


class BudgetExceeded(RuntimeError):
    pass


def _normalize(row: Row, rhs: Fraction) -> tuple[Row, Fraction]:
    """Scale an inequality to integer coefficients with gcd 1 (direction kept)."""
    dens = [x.denominator for x in row if x] + [rhs.denominator]
    lcm = math.lcm(*dens)
    ints = [int(x * lcm) for x in row] + [int(rhs * lcm)]
    g = math.gcd(*ints) or 1
    scaled = [Fraction(v, g) for v in ints]
    return tuple(scaled[:-1]), scaled[-1]


def _normalize_eq(row: Row, rhs: Fraction) -> tuple[Row, Fraction]:
    row, rhs = _normalize(row, rhs)
    lead = next((x for x in row if x), Fraction(1))
    if lead < 0:
        row, rhs = tuple(-x for x in row), -rhs
    return row, rhs


@dataclass
class HPolyhedron:
    n: int
    A: list[Row] = field(default_factory=list)
    b: list[Fraction] = field(default_factory=list)
    E: list[Row] = field(default_factory=list)
    f: list[Fraction] = field(default_factory=list)
    empty: bool = False

    def __post_init__(self):
        self.A = [tuple(Fraction(a) for a in r) for r in self.A]
        self.b = [Fraction(c) for c in self.b]
        self.E = [tuple(Fraction(a) for a in r) for r in self.E]
        self.f = [Fraction(c) for c in self.f]

    def contains(self, x) -> bool:
        if self.empty:
            return False
        x = [Fraction(v) for v in x]
        return (all(sum((a * v for a, v in zip(r, x)), Fraction(0)) <= c for r, c in zip(self.A, self.b))
                and all(sum((a * v for a, v in zip(r, x)), Fraction(0)) == c for r, c in zip(self.E, self.f)))

    def _dedup(self) -> None:
        """Drop duplicate and trivial rows; detect trivially empty systems."""
        seen: dict[Row, Fraction] = {}
        for r, c in zip(self.A, self.b):
            if not any(r):
                if c < 0:
                    self.empty = True
                continue
            r, c = _normalize(r, c)
            if r not in seen or c < seen[r]:
                seen[r] = c
        self.A, self.b = list(seen), list(seen.values())
        eqs: dict[Row, Fraction] = {}
        for r, c in zip(self.E, self.f):
            if not any(r):
                if c != 0:
                    self.empty = True
                continue
            r, c = _normalize_eq(r, c)
            if r in eqs and eqs[r] != c:
                self.empty = True
            eqs[r] = c
        self.E, self.f = list(eqs), list(eqs.values())

    def prune(self) -> None:
        """Remove inequalities implied by the others (one LP per row)."""
        if self.empty:
            return
        keep = list(range(len(self.A)))
        i = 0
        while i < len(keep):
            k = keep[i]
            others = [j for j in keep if j != k]
            lp = LinearProgram(list(self.A[k]), [self.A[j] for j in others], [self.b[j] for j in others],
                               self.E, self.f, free=frozenset(range(self.n)))
            res = solve_lp(lp)
            if res.status is LPStatus.INFEASIBLE:
                self.empty = True
                return
            if res.status is LPStatus.OPTIMAL and res.objective <= self.b[k]:
                keep.pop(i)
            else:
                i += 1
        self.A = [self.A[j] for j in keep]
        self.b = [self.b[j] for j in keep]


def rank(rows: list[Row]) -> int:
    return len(_echelon([list(r) for r in rows]))


def _echelon(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    out: list[list[Fraction]] = []
    pivots: list[int] = []
    for r in rows:
        r = list(r)
        for p, pr in zip(pivots, out):
            if r[p]:
                f = r[p] / pr[p]
                r = [a - f * b for a, b in zip(r, pr)]
        j = next((k for k, a in enumerate(r) if a), None)
        if j is not None:
            out.append(r)
            pivots.append(j)
    return out


def _solve_square(rows: list[Row], rhs: list[Fraction]) -> list[Fraction] | None:
    """Unique solution of ``rows x = rhs`` or None when singular."""
    n = len(rows[0]) if rows else 0
    M = [list(r) + [c] for r, c in zip(rows, rhs)]
    piv_rows = []
    for col in range(n):
        p = next((i for i in range(len(M)) if i not in piv_rows and M[i][col]), None)
        if p is None:
            return None
        piv_rows.append(p)
        pr = M[p]
        inv = 1 / pr[col]
        M[p] = pr = [a * inv for a in pr]
        for i in range(len(M)):
            if i != p and M[i][col]:
                f = M[i][col]
                M[i] = [a - f * b for a, b in zip(M[i], pr)]
    for i in range(len(M)):
        if i not in piv_rows and M[i][-1]:
            return None  # inconsistent
    x = [Fraction(0)] * n
    for col, p in enumerate(piv_rows):
        x[col] = M[p][-1]
    return x


def _nullvector(rows: list[Row], n: int) -> list[Fraction] | None:
    """A nonzero x with rows x = 0 when the nullspace is one-dimensional."""
    ech = _echelon([list(r) for r in rows])
    if len(ech) != n - 1:
        return None
    # reduced row echelon form
    pivots = [next(k for k, a in enumerate(r) if a) for r in ech]
    for i in range(len(ech) - 1, -1, -1):
        p = pivots[i]
        ech[i] = [a / ech[i][p] for a in ech[i]]
        for j in range(i):
            if ech[j][p]:
                f = ech[j][p]
                ech[j] = [a - f * b for a, b in zip(ech[j], ech[i])]
    freecol = next(k for k in range(n) if k not in pivots)
    x = [Fraction(0)] * n
    x[freecol] = Fraction(1)
    for i, p in enumerate(pivots):
        x[p] = -ech[i][freecol]
    return x


def project(P: HPolyhedron, keep: list[int], budget: int = 5000, prune_every: int = 1) -> HPolyhedron:
    """Project ``P`` onto the coordinates ``keep`` (in that order).

    Raises BudgetExceeded when an intermediate system has more than
    ``budget`` inequalities.
    """
    A = [list(r) for r in P.A]
    b = list(P.b)
    E = [list(r) for r in P.E]
    f = list(P.f)
    eliminate = [j for j in range(P.n) if j not in keep]
    remaining = []
    # equalities first: each one that touches an eliminated variable removes it
    for j in eliminate:
        k = next((i for i, r in enumerate(E) if r[j]), None)
        if k is None:
            remaining.append(j)
            continue
        er, ef = E.pop(k), f.pop(k)
        for rows, rhs in ((A, b), (E, f)):
            for i, r in enumerate(rows):
                if r[j]:
                    c = r[j] / er[j]
                    rows[i] = [x - c * y for x, y in zip(r, er)]
                    rhs[i] -= c * ef
    cur = HPolyhedron(P.n, [tuple(r) for r in A], b, [tuple(r) for r in E], f, P.empty)
    cur._dedup()
    step = 0
    for j in remaining:
        pos = [(r, c) for r, c in zip(cur.A, cur.b) if r[j] > 0]
        neg = [(r, c) for r, c in zip(cur.A, cur.b) if r[j] < 0]
        zero = [(r, c) for r, c in zip(cur.A, cur.b) if r[j] == 0]
        if len(zero) + len(pos) * len(neg) > budget:
            raise BudgetExceeded(f"Fourier-Motzkin step would create {len(zero) + len(pos) * len(neg)} rows")
        new = list(zero)
        for (rp, cp), (rn, cn) in itertools.product(pos, neg):
            lp_, ln_ = -rn[j], rp[j]
            new.append((tuple(lp_ * x + ln_ * y for x, y in zip(rp, rn)), lp_ * cp + ln_ * cn))
        cur.A = [r for r, _ in new]
        cur.b = [c for _, c in new]
        cur._dedup()
        step += 1
        if prune_every and step % prune_every == 0:
            cur.prune()
        if cur.empty:
            break
    out = HPolyhedron(len(keep), [tuple(r[j] for j in keep) for r in cur.A], cur.b,
                      [tuple(r[j] for j in keep) for r in cur.E], cur.f, cur.empty)
    out._dedup()
    out.prune()
    return out


def enumerate_vertices(P: HPolyhedron, budget: int = 200_000
                       ) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
    """Vertices and extreme rays of a pointed polyhedron by basis enumeration.

    Raises ValueError if the polyhedron has a lineality space and
    BudgetExceeded if more than ``budget`` row subsets would be tried.
    """
    if P.empty:
        return [], []
    n = P.n
    eq_rank = rank(P.E)
    if rank(list(P.A) + list(P.E)) < n:
        raise ValueError("polyhedron is not pointed")
    m = len(P.A)
    k_v = n - eq_rank
    k_r = n - 1 - eq_rank
    n_subsets = math.comb(m, k_v) + (math.comb(m, k_r) if k_r >= 0 else 0)
    if n_subsets > budget:
        raise BudgetExceeded(f"{n_subsets} bases to enumerate")
    eq_basis = _echelon([list(r) for r in P.E])
    eq_rows = [tuple(r) for r in eq_basis]
    # right-hand sides of the echelon basis: recompute by solving on the original system
    verts: set[tuple[Fraction, ...]] = set()
    for S in itertools.combinations(range(m), k_v):
        rows = list(P.E) + [P.A[i] for i in S]
        rhs = list(P.f) + [P.b[i] for i in S]
        if rank(rows) < n:
            continue
        x = _solve_square(rows, rhs)
        if x is not None and P.contains(x):
            verts.add(tuple(x))
    rays: set[tuple[Fraction, ...]] = set()
    if k_r >= 0:
        for S in itertools.combinations(range(m), k_r):
            rows = eq_rows + [P.A[i] for i in S]
            d = _nullvector(rows, n)
            if d is None:
                continue
            for sgn in (1, -1):
                dd = [sgn * v for v in d]
                if all(sum((a * v for a, v in zip(r, dd)), Fraction(0)) <= 0 for r in P.A):
                    scale = max(abs(v) for v in dd)
                    rays.add(tuple(v / scale for v in dd))
    return [list(v) for v in sorted(verts)], [list(r) for r in sorted(rays)]
