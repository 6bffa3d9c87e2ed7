"""Cone-constrained market models on scenario trees and arbitrage checks.

A strategy is parametrized per internal node by nonnegative weights on the
cone generators.  A generator whose negative is also a generator is merged
into a single free column, so the unconstrained cone costs ``d`` free
variables per node instead of ``2d`` signed ones.  All checks are exact LPs
solved by :mod:`ftaplab.lp`; every certificate is re-verified by direct
recomputation before it is returned.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Literal

from .calculus import stochastic_integral
from .lp import LinearProgram, LPStatus, solve_lp, solve_lp_many
from .polyhedra import BudgetExceeded, HPolyhedron, enumerate_vertices, project
from .tree import (AdaptedProcess, PredictableControl, ScenarioTree, TerminalVariable,
                   TreeError, as_fraction, as_vector)

__all__ = [
    "MarketModel", "WealthProcess", "ArbitrageCertificate", "NAResult", "Verdict",
    "ConeViolation", "NoDominatingElement", "NoMaximalElement", "InconsistentVerdicts",
    "TerminalPolyhedron", "MaximalElement",
    "wealth", "check_na", "check_nupbr", "check_nflvr", "terminal_cone_generators",
    "maximal_element", "fork_concatenate", "concatenate",
]

Ray = tuple[Fraction, ...]


class ConeViolation(ValueError):
    def __init__(self, node: int, value):
        super().__init__(f"strategy value {value} at node {node} is outside the node cone")
        self.node = node


class NoDominatingElement(ValueError):
    pass


class NoMaximalElement(ValueError):
    """Dominating elements exist but their weighted mean is unbounded (arbitrage)."""


class InconsistentVerdicts(RuntimeError):
    pass


@dataclass(frozen=True)
class Column:
    """One strategy coordinate at a node: direction ``ray``, sign-free or not."""

    node: int
    ray: Ray
    free: bool


class MarketModel:
    """Discounted prices ``S`` with a finitely generated cone at each internal node.

    ``cones`` maps a node to its generator rays; nodes not listed are
    unconstrained.  An empty generator list means no trading at that node.
    """

    def __init__(self, S: AdaptedProcess, cones: Mapping[int, Sequence] | None = None,
                 floor=1):
        self.S = S
        self.tree: ScenarioTree = S.tree
        self.dim = S.dim
        self.floor = as_fraction(floor)
        if self.floor < 0:
            raise ValueError("admissibility floor must be nonnegative")
        self._explicit: dict[int, tuple[Ray, ...]] = {}
        for v, rays in (cones or {}).items():
            if v not in self.tree or self.tree.is_leaf(v):
                raise TreeError(f"cone given for node {v}, which is not an internal node")
            gens = []
            for r in rays:
                r = as_vector(r)
                if len(r) != self.dim:
                    raise ValueError(f"cone ray {r} at node {v} has wrong dimension")
                if not any(r):
                    raise ValueError(f"zero cone generator at node {v}")
                if r not in gens:
                    gens.append(r)
            self._explicit[v] = tuple(gens)

    @classmethod
    def unconstrained(cls, S: AdaptedProcess, floor=1) -> MarketModel:
        return cls(S, None, floor)

    def __repr__(self) -> str:
        return f"MarketModel(tree={self.tree!r}, dim={self.dim}, constrained={sorted(self._explicit)}, floor={self.floor})"

    def with_floor(self, floor) -> MarketModel:
        return MarketModel(self.S, self._explicit, floor)

    @property
    def cones(self) -> dict[int, tuple[Ray, ...]]:
        """Explicitly constrained nodes and their generators."""
        return dict(self._explicit)

    def is_constrained(self, v: int) -> bool:
        return v in self._explicit

    def generators(self, v: int) -> tuple[Ray, ...]:
        if v in self._explicit:
            return self._explicit[v]
        out = []
        for i in range(self.dim):
            e = [Fraction(0)] * self.dim
            e[i] = Fraction(1)
            out.append(tuple(e))
            e[i] = Fraction(-1)
            out.append(tuple(e))
        return tuple(out)

    def columns(self, v: int) -> tuple[Column, ...]:
        return self._columns[v]

    @cached_property
    def _columns(self) -> dict[int, tuple[Column, ...]]:
        cols = {}
        for v in self.tree.internal:
            if v not in self._explicit:
                cols[v] = tuple(Column(v, r, True) for r in self.generators(v)[::2])
                continue
            gens = self._explicit[v]
            out, used = [], set()
            for r in gens:
                if r in used:
                    continue
                neg = tuple(-x for x in r)
                if neg in gens:
                    used.add(neg)
                    out.append(Column(v, r, True))
                else:
                    out.append(Column(v, r, False))
                used.add(r)
            cols[v] = tuple(out)
        return cols

    @cached_property
    def all_columns(self) -> tuple[Column, ...]:
        return tuple(c for v in self.tree.internal for c in self._columns[v])

    def gain(self, col: Column, child: int) -> Fraction:
        """``<ray, Delta S>`` on the edge into ``child``."""
        return sum((a * b for a, b in zip(col.ray, self.S.increment(child))), Fraction(0))

    @cached_property
    def gain_rows(self) -> dict[int, dict[int, Fraction]]:
        """Sparse map node -> {column index: coefficient of that column in wealth}."""
        tree = self.tree
        index = {c: k for k, c in enumerate(self.all_columns)}
        rows: dict[int, dict[int, Fraction]] = {tree.root: {}}
        for v in tree.internal:
            base = rows[v]
            for c in tree.children(v):
                row = dict(base)
                for col in self._columns[v]:
                    g = self.gain(col, c)
                    if g:
                        row[index[col]] = g
                rows[c] = row
        return rows

    def terminal_generators(self) -> list[tuple[Column, dict[int, Fraction]]]:
        """Per column ``g(omega) = 1{omega below v} <ray, Delta S>`` as leaf maps."""
        tree = self.tree
        out = []
        for col in self.all_columns:
            g = {}
            for c in tree.children(col.node):
                gc = self.gain(col, c)
                if gc:
                    for w in tree.leaves_below(c):
                        g[w] = gc
            out.append((col, g))
        return out

    def strategy_from_columns(self, x: Sequence[Fraction]) -> PredictableControl:
        vals = {v: [Fraction(0)] * self.dim for v in self.tree.internal}
        for k, col in enumerate(self.all_columns):
            if x[k]:
                vec = vals[col.node]
                for i, a in enumerate(col.ray):
                    vec[i] += x[k] * a
        return PredictableControl(self.tree, {v: tuple(a) for v, a in vals.items()}, self.dim)

    def in_cone(self, v: int, value) -> bool:
        value = as_vector(value)
        if not any(value):
            return True
        if v not in self._explicit:
            return True
        gens = self._explicit[v]
        if not gens:
            return False
        lp = LinearProgram([0] * len(gens),
                           A_eq=[[g[i] for g in gens] for i in range(self.dim)], b_eq=list(value))
        return solve_lp(lp).status is LPStatus.OPTIMAL


@dataclass(frozen=True)
class WealthProcess:
    strategy: PredictableControl
    wealth: AdaptedProcess
    floor: Fraction
    admissible: bool

    @property
    def terminal(self) -> TerminalVariable:
        return self.wealth.terminal()

    @property
    def value(self) -> AdaptedProcess:
        """The ``1 + X`` form."""
        return self.wealth + 1


def wealth(model: MarketModel, phi: PredictableControl, check_cone: bool = True) -> WealthProcess:
    """``(phi . S)`` with the admissibility flag ``wealth >= -floor`` everywhere."""
    if check_cone:
        for v in model.tree.internal:
            if not model.in_cone(v, phi[v]):
                raise ConeViolation(v, phi[v])
    W = stochastic_integral(phi, model.S)
    ok = all(W.scalar(v) >= -model.floor for v in model.tree.ids)
    return WealthProcess(phi, W, model.floor, ok)


@dataclass(frozen=True)
class ArbitrageCertificate:
    kind: Literal["NA-violation", "NUPBR-violation"]
    strategy: PredictableControl
    terminal: TerminalVariable
    wealth: AdaptedProcess

    def verify(self, model: MarketModel) -> bool:
        """Recompute the wealth and check the defining sign conditions."""
        W = stochastic_integral(self.strategy, model.S)
        if W != self.wealth:
            return False
        if any(not model.in_cone(v, self.strategy[v]) for v in model.tree.internal):
            return False
        t = W.terminal()
        if t != self.terminal:
            return False
        vals = [t[w] for w in model.tree.leaves]
        if min(vals) < 0 or max(vals) <= 0:
            return False
        if self.kind == "NUPBR-violation":
            return all(W.scalar(v) >= 0 for v in model.tree.ids)
        return all(W.scalar(v) >= -model.floor for v in model.tree.ids)

    def summary(self) -> str:
        from .tree import _fmt_vec
        parts = [f"{v}:{_fmt_vec(self.strategy[v])}" for v in self.strategy.tree.internal
                 if any(self.strategy[v])]
        return f"{self.kind} strategy {' '.join(parts) or '0'}"


def _certificate(model: MarketModel, x, kind) -> ArbitrageCertificate:
    phi = model.strategy_from_columns(x)
    W = stochastic_integral(phi, model.S)
    return ArbitrageCertificate(kind, phi, W.terminal(), W)


def _profit_lp(model: MarketModel, nonneg_wealth: bool) -> LinearProgram:
    """max E[W_T] s.t. W >= -floor (or >= 0), 0 <= W_T <= 1."""
    tree = model.tree
    cols = model.all_columns
    rows, rhs = [], []
    floor = Fraction(0) if nonneg_wealth else model.floor
    for v in tree.ids:
        if v == tree.root:
            continue
        g = model.gain_rows[v]
        if not g:
            continue
        neg = {k: -a for k, a in g.items()}
        if tree.is_leaf(v):
            rows.append(neg)
            rhs.append(0)
            rows.append(g)
            rhs.append(1)
        else:
            rows.append(neg)
            rhs.append(floor)
    c = [Fraction(0)] * len(cols)
    for w in tree.leaves:
        p = tree.prob(w)
        for k, a in model.gain_rows[w].items():
            c[k] += p * a
    return LinearProgram(c, rows, rhs, free=frozenset(k for k, col in enumerate(cols) if col.free))


@dataclass(frozen=True)
class NAResult:
    holds: bool
    certificate: ArbitrageCertificate | None = None
    optimum: Fraction = Fraction(0)


def _check(model: MarketModel, nonneg: bool) -> NAResult:
    kind = "NUPBR-violation" if nonneg else "NA-violation"
    if not model.all_columns:
        return NAResult(True)
    if model.floor == 0:
        nonneg = True  # zero floor: admissible wealth is nonnegative wealth
    res = solve_lp(_profit_lp(model, nonneg))
    if res.status is not LPStatus.OPTIMAL or not res.verify():
        raise RuntimeError(f"profit LP returned {res.status} or failed verification")
    if res.objective == 0:
        return NAResult(True)
    cert = _certificate(model, res.x, kind)
    if not cert.verify(model):
        raise RuntimeError("arbitrage certificate failed verification")
    return NAResult(False, cert, res.objective)


def check_na(model: MarketModel) -> NAResult:
    """No arbitrage among floor-admissible strategies."""
    return _check(model, nonneg=False)


def check_nupbr(model: MarketModel) -> NAResult:
    """No unbounded profit: no nonnegative-wealth strategy with nonzero terminal wealth."""
    return _check(model, nonneg=True)


@dataclass(frozen=True)
class Verdict:
    holds: bool
    na: NAResult
    nupbr: NAResult
    esm: object  # duality.ESMResult
    certificate: ArbitrageCertificate | None = None


def check_nflvr(model: MarketModel, cross_check: bool = True) -> Verdict:
    """NA and NUPBR jointly, cross-validated against the separating-measure LP."""
    from .duality import esm_exists

    na, nupbr = check_na(model), check_nupbr(model)
    holds = na.holds and nupbr.holds
    cert = na.certificate if not na.holds else nupbr.certificate
    esm = esm_exists(model) if cross_check else None
    if cross_check and esm.exists != holds:
        raise InconsistentVerdicts(f"NA/NUPBR say {holds}, separating-measure LP says {esm.exists}")
    return Verdict(holds, na, nupbr, esm, cert)


# -- terminal polyhedron ----------------------------------------------------

@dataclass
class TerminalPolyhedron:
    """``{(phi . S)_T : phi in the cones, wealth >= -floor}`` in leaf coordinates."""

    leaves: tuple[int, ...]
    form: Literal["explicit", "implicit"]
    generators: list[TerminalVariable]  # cone generators of K_0 (always present)
    vertices: list[TerminalVariable] = field(default_factory=list)
    rays: list[TerminalVariable] = field(default_factory=list)
    hrep: HPolyhedron | None = None


def _strategy_polyhedron(model: MarketModel) -> tuple[HPolyhedron, int]:
    """Joint polyhedron in (columns, leaf wealths)."""
    tree = model.tree
    cols = model.all_columns
    nc, leaves = len(cols), tree.leaves
    n = nc + len(leaves)
    A, b, E, f = [], [], [], []
    for k, col in enumerate(cols):
        if not col.free:
            r = [Fraction(0)] * n
            r[k] = Fraction(-1)
            A.append(tuple(r))
            b.append(Fraction(0))
    for v in tree.ids:
        if v == tree.root:
            continue
        r = [Fraction(0)] * n
        for k, a in model.gain_rows[v].items():
            r[k] = -a
        A.append(tuple(r))
        b.append(model.floor)
    for i, w in enumerate(leaves):
        r = [Fraction(0)] * n
        for k, a in model.gain_rows[w].items():
            r[k] = a
        r[nc + i] = Fraction(-1)
        E.append(tuple(r))
        f.append(Fraction(0))
    return HPolyhedron(n, A, b, E, f), nc


def terminal_cone_generators(model: MarketModel, budget: int = 5000) -> TerminalPolyhedron:
    """Generators of ``K_0`` plus a vertex/ray description of the floor-admissible set.

    The explicit form comes from Fourier-Motzkin projection of the joint
    (strategy, terminal) polyhedron; if the budget is exceeded only the
    generators (the implicit LP-oracle form) are returned.
    """
    tree = model.tree
    leaves = tree.leaves
    gens = [TerminalVariable(tree, {w: g.get(w, Fraction(0)) for w in leaves})
            for _, g in model.terminal_generators()]
    P, nc = _strategy_polyhedron(model)
    try:
        image = project(P, list(range(nc, P.n)), budget=budget)
        verts, rays = enumerate_vertices(image, budget=budget * 40)
    except BudgetExceeded:
        return TerminalPolyhedron(leaves, "implicit", gens)
    mk = lambda vec: TerminalVariable(tree, dict(zip(leaves, vec)))
    return TerminalPolyhedron(leaves, "explicit", gens, [mk(v) for v in verts], [mk(r) for r in rays], image)


@dataclass(frozen=True)
class MaximalElement:
    h0: TerminalVariable
    strategy: PredictableControl
    wealth: AdaptedProcess
    verified: bool  # per-coordinate improvement LPs found nothing

    def dominates_strictly(self, f: TerminalVariable) -> bool:
        vals = [(self.h0[w], f[w]) for w in self.h0.tree.leaves]
        return all(a >= b for a, b in vals) and any(a > b for a, b in vals)


def _dominating_lp(model: MarketModel, f, objective: dict[int, Fraction]) -> LinearProgram:
    tree = model.tree
    cols = model.all_columns
    rows, rhs = [], []
    for v in tree.ids:
        if v == tree.root:
            continue
        neg = {k: -a for k, a in model.gain_rows[v].items()}
        rows.append(neg)
        rhs.append(-f[v] if tree.is_leaf(v) else model.floor)  # leaf floor implied by f >= -floor
    c = [Fraction(0)] * len(cols)
    for w, wt in objective.items():
        for k, a in model.gain_rows[w].items():
            c[k] += wt * a
    return LinearProgram(c, rows, rhs, free=frozenset(k for k, col in enumerate(cols) if col.free))


def maximal_element(model: MarketModel, f: TerminalVariable, verify: bool = True) -> MaximalElement:
    """A pointwise-maximal admissible terminal wealth ``h0 >= f``."""
    tree = model.tree
    if any(f[w] < -model.floor for w in tree.leaves):
        raise ValueError("f must be bounded below by -floor")
    weights = {w: tree.prob(w) for w in tree.leaves}
    if not model.all_columns:
        if any(f[w] > 0 for w in tree.leaves):
            raise NoDominatingElement("only zero wealth is attainable and it does not dominate f")
        zero = PredictableControl.constant(tree, 0, model.dim)
        W = AdaptedProcess.constant(tree, 0)
        return MaximalElement(W.terminal(), zero, W, True)
    res = solve_lp(_dominating_lp(model, f, weights))
    if res.status is LPStatus.INFEASIBLE:
        raise NoDominatingElement("no admissible terminal wealth dominates f")
    if res.status is LPStatus.UNBOUNDED:
        raise NoMaximalElement("dominating wealths have unbounded mean (the model admits arbitrage)")
    phi = model.strategy_from_columns(res.x)
    W = stochastic_integral(phi, model.S)
    h0 = W.terminal()
    ok = True
    if verify:
        lp = _dominating_lp(model, h0, weights)
        objs = [_dominating_lp(model, h0, {w: Fraction(1)}).c for w in tree.leaves]
        results = solve_lp_many(lp, objs)
        for w, r in zip(tree.leaves, results):
            if r.status is not LPStatus.OPTIMAL or r.objective != h0[w]:
                ok = False
    return MaximalElement(h0, phi, W, ok)


# -- concatenation -----------------------------------------------------------

def fork_concatenate(model: MarketModel, X: WealthProcess, Xt: WealthProcess, t: int,
                     A) -> WealthProcess:
    """Re-invest the wealth ``1 + X`` at time ``t`` into ``1 + Xt`` on the event ``A``.

    ``A`` is a set of time-``t`` nodes (each standing for its subtree).
    """
    tree = model.tree
    A = frozenset(A)
    if any(v not in tree or tree.time(v) != t for v in A):
        raise ValueError(f"A must consist of time-{t} nodes")
    V, Vt = X.value, Xt.value
    if any(Vt.scalar(v) <= 0 for v in tree.ids):
        raise ValueError("the re-investment target must be strictly positive")
    scale: dict[int, Fraction] = {}
    for a in A:
        s = V.scalar(a) / Vt.scalar(a)
        for u in tree.descendants(a):
            scale[u] = s
    vals = {}
    for v in tree.internal:
        if v in scale:
            vals[v] = tuple(scale[v] * x for x in Xt.strategy[v])
        else:
            vals[v] = X.strategy[v]
    phi = PredictableControl(tree, vals, model.dim)
    out = wealth(model, phi, check_cone=False)
    expect = {v: (scale[v] * Vt.scalar(v) if v in scale else V.scalar(v)) - 1 for v in tree.ids}
    if any(out.wealth.scalar(v) != expect[v] for v in tree.ids):
        raise RuntimeError("concatenated strategy does not reproduce the fork formula")
    return out


def concatenate(model: MarketModel, H: PredictableControl, G: PredictableControl,
                X: WealthProcess, Y: WealthProcess) -> WealthProcess:
    """``Z = (H . X) + (G . Y)`` for nonnegative scalar ``H, G`` with disjoint supports."""
    tree = model.tree
    for v in tree.internal:
        h, g = H.scalar(v), G.scalar(v)
        if h < 0 or g < 0:
            raise ValueError(f"negative weight at node {v}")
        if h * g != 0:
            raise ValueError(f"H and G overlap at node {v}")
    vals = {v: tuple(H.scalar(v) * a + G.scalar(v) * b
                     for a, b in zip(X.strategy[v], Y.strategy[v])) for v in tree.internal}
    phi = PredictableControl(tree, vals, model.dim)
    out = wealth(model, phi, check_cone=False)
    direct = stochastic_integral(H, X.wealth) + stochastic_integral(G, Y.wealth)
    if direct != out.wealth:
        raise RuntimeError("concatenation identity failed")
    return out
