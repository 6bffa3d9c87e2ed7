"""Exact rational linear programming.

Dense two-phase primal simplex over ``gmpy2.mpq``.  Entering columns follow
Dantzig's rule and fall back to Bland's rule after a run of degenerate
pivots, which rules out cycling.  Every outcome carries a certificate that
can be re-checked by substitution:

* optimal    -> primal ``x`` and dual multipliers with equal objective,
* infeasible -> Farkas multipliers ``(u >= 0, v)``,
* unbounded  -> a feasible ``x`` and an improving recession ray.

Problems are stated as::

    maximize    c . x
    subject to  A_ub x <= b_ub,   A_eq x = b_eq,
                x_j >= 0 unless j is listed in ``free``.

Rows may be dense sequences or sparse ``{column: coefficient}`` mappings.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from gmpy2 import mpq

__all__ = ["LPStatus", "LinearProgram", "LPResult", "LPError", "solve_lp", "solve_lp_many"]

_ZERO = mpq(0)
_DEGENERATE_RUN = 25


class LPError(RuntimeError):
    pass


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _q(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def _f(x: mpq) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


def _sparse(row, n: int) -> dict[int, mpq]:
    if isinstance(row, Mapping):
        out = {}
        for j, a in row.items():
            if not 0 <= j < n:
                raise LPError(f"column {j} out of range")
            if a:
                out[j] = _q(a)
        return out
    if len(row) != n:
        raise LPError(f"row has {len(row)} entries, expected {n}")
    return {j: _q(a) for j, a in enumerate(row) if a}


@dataclass
class LinearProgram:
    c: Sequence
    A_ub: Sequence = ()
    b_ub: Sequence = ()
    A_eq: Sequence = ()
    b_eq: Sequence = ()
    free: frozenset[int] = frozenset()

    def __post_init__(self):
        self.n = len(self.c)
        if len(self.A_ub) != len(self.b_ub) or len(self.A_eq) != len(self.b_eq):
            raise LPError("constraint rows and right-hand sides differ in length")
        self.free = frozenset(self.free)
        if any(not 0 <= j < self.n for j in self.free):
            raise LPError("free index out of range")
        self._ub = [_sparse(r, self.n) for r in self.A_ub]
        self._eq = [_sparse(r, self.n) for r in self.A_eq]
        self._bub = [_q(b) for b in self.b_ub]
        self._beq = [_q(b) for b in self.b_eq]
        self._c = [_q(a) for a in self.c]


@dataclass
class LPResult:
    status: LPStatus
    x: list[Fraction] | None = None
    objective: Fraction | None = None
    dual_ub: list[Fraction] | None = None  # optimal: dual values; infeasible: Farkas u
    dual_eq: list[Fraction] | None = None  # optimal: dual values; infeasible: Farkas v
    ray: list[Fraction] | None = None
    pivots: int = 0
    lp: LinearProgram | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL

    def verify(self) -> bool:
        """Re-check the attached certificate by exact substitution."""
        return verify_certificate(self.lp, self)


def _dot(row: dict[int, mpq], x: Sequence) -> mpq:
    return sum((a * x[j] for j, a in row.items()), _ZERO)


def verify_certificate(lp: LinearProgram, res: LPResult) -> bool:
    if lp is None:
        return False
    n = lp.n
    if res.status in (LPStatus.OPTIMAL, LPStatus.UNBOUNDED):
        x = [_q(v) for v in res.x]
        if any(x[j] < 0 for j in range(n) if j not in lp.free):
            return False
        if any(_dot(r, x) > b for r, b in zip(lp._ub, lp._bub)):
            return False
        if any(_dot(r, x) != b for r, b in zip(lp._eq, lp._beq)):
            return False
    if res.status is LPStatus.UNBOUNDED:
        d = [_q(v) for v in res.ray]
        if any(d[j] < 0 for j in range(n) if j not in lp.free):
            return False
        if any(_dot(r, d) > 0 for r in lp._ub) or any(_dot(r, d) != 0 for r in lp._eq):
            return False
        return sum((a * b for a, b in zip(lp._c, d)), _ZERO) > 0
    u = [_q(v) for v in res.dual_ub]
    v = [_q(a) for a in res.dual_eq]
    if any(a < 0 for a in u):
        return False
    col = [_ZERO] * n
    for ui, r in zip(u, lp._ub):
        if ui:
            for j, a in r.items():
                col[j] += ui * a
    for vi, r in zip(v, lp._eq):
        if vi:
            for j, a in r.items():
                col[j] += vi * a
    rhs = sum((a * b for a, b in zip(u, lp._bub)), _ZERO) + sum((a * b for a, b in zip(v, lp._beq)), _ZERO)
    if res.status is LPStatus.INFEASIBLE:
        ok = all(col[j] == 0 if j in lp.free else col[j] >= 0 for j in range(n))
        return ok and rhs < 0
    # optimal: dual feasibility and zero duality gap
    ok = all(col[j] == lp._c[j] if j in lp.free else col[j] >= lp._c[j] for j in range(n))
    return ok and rhs == _q(res.objective) == sum((a * _q(b) for a, b in zip(lp._c, res.x)), _ZERO)


class _Tableau:
    """Standard-form tableau ``[A | I-ish | b]`` with a reduced-cost row."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        n = lp.n
        # columns: structural (free vars split into +/-), slacks, artificials
        cols: list[tuple[int, int]] = [(j, 1) for j in range(n)]
        cols += [(j, -1) for j in sorted(lp.free)]
        self.n_struct = len(cols)
        self.colmap = cols
        m_ub, m_eq = len(lp._ub), len(lp._eq)
        self.m = m = m_ub + m_eq
        self.slack0 = self.n_struct
        n_art = 0
        need_art = []
        self.negated = []
        for i in range(m):
            b = lp._bub[i] if i < m_ub else lp._beq[i - m_ub]
            neg = b < 0
            self.negated.append(neg)
            if i >= m_ub or neg:
                need_art.append(i)
        self.art0 = self.slack0 + m_ub
        self.art_of = {i: self.art0 + k for k, i in enumerate(need_art)}
        self.ncols = self.art0 + len(need_art)
        self.unit = [self.art_of.get(i, self.slack0 + i) for i in range(m)]
        width = self.ncols + 1
        T = []
        for i in range(m):
            row = [_ZERO] * width
            if i < m_ub:
                src, b = lp._ub[i], lp._bub[i]
            else:
                src, b = lp._eq[i - m_ub], lp._beq[i - m_ub]
            sgn = -1 if self.negated[i] else 1
            for j, a in src.items():
                row[j] = sgn * a
                if j in lp.free:
                    row[self._neg_col(j)] = -sgn * a
            if i < m_ub:
                row[self.slack0 + i] = mpq(sgn)
            if i in self.art_of:
                row[self.art_of[i]] = mpq(1)
            row[-1] = sgn * b
            T.append(row)
        self.T = T
        self.basis = list(self.unit)
        self.pivots = 0

    def _neg_col(self, j: int) -> int:
        return self.n + sorted(self.lp.free).index(j)

    @property
    def n(self) -> int:
        return self.lp.n

    def _set_costs(self, cost: list[mpq]) -> None:
        """Install a cost vector and compute the reduced-cost row."""
        self.cost = cost
        d = list(cost) + [_ZERO]
        for i, bj in enumerate(self.basis):
            cb = cost[bj]
            if cb:
                row = self.T[i]
                for k, a in enumerate(row):
                    if a:
                        d[k] -= cb * a
        self.d = d  # d[-1] = -objective

    def _pivot(self, r: int, j: int) -> None:
        T = self.T
        prow = T[r]
        piv = prow[j]
        if piv != 1:
            inv = 1 / piv
            prow = [a * inv if a else a for a in prow]
            T[r] = prow
        nz = [k for k, a in enumerate(prow) if a]
        for i, row in enumerate(T):
            if i != r:
                f = row[j]
                if f:
                    for k in nz:
                        row[k] -= f * prow[k]
        f = self.d[j]
        if f:
            d = self.d
            for k in nz:
                d[k] -= f * prow[k]
        self.basis[r] = j
        self.pivots += 1

    def _run(self, allowed: int) -> tuple[str, int | None]:
        """Primal simplex on columns ``< allowed``; returns (status, entering col)."""
        T, d = self.T, self.d
        degenerate = 0
        while True:
            if degenerate >= _DEGENERATE_RUN:
                j = next((k for k in range(allowed) if d[k] > 0), None)
            else:
                j, best = None, _ZERO
                for k in range(allowed):
                    if d[k] > best:
                        j, best = k, d[k]
            if j is None:
                return "optimal", None
            r, ratio = None, None
            for i, row in enumerate(T):
                a = row[j]
                if a > 0:
                    q = row[-1] / a
                    if ratio is None or q < ratio or (q == ratio and self.basis[i] < self.basis[r]):
                        r, ratio = i, q
            if r is None:
                return "unbounded", j
            degenerate = degenerate + 1 if ratio == 0 else 0
            self._pivot(r, j)

    def phase1(self) -> bool:
        """Drive artificials to zero; False if the constraints are infeasible."""
        cost = [_ZERO] * self.ncols
        for k in range(self.art0, self.ncols):
            cost[k] = mpq(-1)
        self._set_costs(cost)
        if self.ncols == self.art0:
            return True
        self._run(self.ncols)
        if -self.d[-1] < 0:
            return False
        # pivot remaining (zero-level) artificials out where possible
        for i, bj in enumerate(self.basis):
            if bj >= self.art0:
                row = self.T[i]
                j = next((k for k in range(self.art0) if row[k]), None)
                if j is not None:
                    self._pivot(i, j)
        return True

    def duals(self) -> tuple[list[Fraction], list[Fraction]]:
        """Multipliers for the original rows from the current reduced costs."""
        m_ub = len(self.lp._ub)
        ys = []
        for i in range(self.m):
            col = self.unit[i]
            y = self.cost[col] - self.d[col]
            if self.negated[i]:
                y = -y
            ys.append(_f(y))
        return ys[:m_ub], ys[m_ub:]

    def point(self) -> list[Fraction]:
        vals = [_ZERO] * self.ncols
        for i, bj in enumerate(self.basis):
            vals[bj] = self.T[i][-1]
        return self._to_original(vals)

    def _to_original(self, vals) -> list[Fraction]:
        x = [_ZERO] * self.n
        for k, (j, s) in enumerate(self.colmap):
            if vals[k]:
                x[j] += s * vals[k]
        return [_f(a) for a in x]

    def ray(self, j: int) -> list[Fraction]:
        vals = [_ZERO] * self.ncols
        vals[j] = mpq(1)
        for i, bj in enumerate(self.basis):
            vals[bj] = -self.T[i][j]
        return self._to_original(vals)

    def phase2(self, c: list[mpq]) -> LPResult:
        cost = [_ZERO] * self.ncols
        for k, (j, s) in enumerate(self.colmap):
            cost[k] = s * c[j]
        self._set_costs(cost)
        status, j = self._run(self.art0)
        if status == "unbounded":
            return LPResult(LPStatus.UNBOUNDED, x=self.point(), ray=self.ray(j),
                            pivots=self.pivots, lp=self.lp)
        u, v = self.duals()
        return LPResult(LPStatus.OPTIMAL, x=self.point(), objective=_f(-self.d[-1]),
                        dual_ub=u, dual_eq=v, pivots=self.pivots, lp=self.lp)

    def infeasible(self) -> LPResult:
        u, v = self.duals()
        return LPResult(LPStatus.INFEASIBLE, dual_ub=u, dual_eq=v, pivots=self.pivots, lp=self.lp)


def solve_lp(lp: LinearProgram) -> LPResult:
    """Solve ``lp`` exactly; see the module docstring for the problem form."""
    return solve_lp_many(lp, [lp.c])[0]


def solve_lp_many(lp: LinearProgram, objectives: Sequence[Sequence]) -> list[LPResult]:
    """Solve one constraint system against several objectives.

    Phase 1 runs once; each objective is optimized starting from the basis
    left by the previous one.  Each result is a full, independently
    verifiable certificate for its own objective.
    """
    tab = _Tableau(lp)
    if not tab.phase1():
        res = tab.infeasible()
        return [res for _ in objectives]
    out = []
    for c in objectives:
        if len(c) != lp.n:
            raise LPError("objective length mismatch")
        before = tab.pivots
        cq = [_q(a) for a in c]
        res = tab.phase2(cq)
        res.pivots = tab.pivots - before
        if len(objectives) > 1:
            res.lp = LinearProgram(list(c), lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lp.free)
        out.append(res)
    return out
