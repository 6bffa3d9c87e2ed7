"""Finite filtered probability spaces encoded as scenario trees.

Nodes at depth ``t`` are the atoms of ``F_t``.  Every probability and every
process value is an exact :class:`fractions.Fraction`.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Callable, Union

Number = Union[int, Fraction]
Vector = tuple[Fraction, ...]


class TreeError(ValueError):
    """Raised when a tree or a process on it violates a structural invariant."""


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        # gmpy2.mpq and friends
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def as_vector(value) -> Vector:
    if isinstance(value, (tuple, list)):
        return tuple(as_fraction(v) for v in value)
    return (as_fraction(value),)


@dataclass(frozen=True)
class Node:
    id: int
    parent: int | None
    time: int
    prob: Fraction  # conditional on the parent; 1 for the root


class ScenarioTree:
    """Rooted tree with strictly positive conditional branch probabilities.

    Leaves are exactly the nodes at the horizon.  A one-node tree is allowed
    (horizon 0); it is the trivial filtration.
    """

    __slots__ = ("_nodes", "_by_id", "_children", "__dict__")

    def __init__(self, nodes: Iterable[Node]):
        nodes = tuple(sorted(nodes, key=lambda n: n.id))
        by_id: dict[int, Node] = {}
        for n in nodes:
            if n.id in by_id:
                raise TreeError(f"duplicate node id {n.id}")
            if n.id < 0:
                raise TreeError(f"node ids must be nonnegative, got {n.id}")
            by_id[n.id] = n
        roots = [n for n in nodes if n.parent is None]
        if len(roots) != 1:
            raise TreeError(f"expected exactly one root, found {len(roots)}")
        children: dict[int, list[int]] = {n.id: [] for n in nodes}
        for n in nodes:
            if n.parent is None:
                if n.time != 0:
                    raise TreeError("root must sit at time 0")
                if n.prob != 1:
                    raise TreeError("root probability must be 1")
                continue
            if n.parent not in by_id:
                raise TreeError(f"node {n.id} has unknown parent {n.parent}")
            if n.time != by_id[n.parent].time + 1:
                raise TreeError(f"node {n.id}: time must be parent's time + 1")
            if n.prob <= 0:
                raise TreeError(f"node {n.id}: probability must be positive")
            children[n.parent].append(n.id)
        horizon = max(n.time for n in nodes)
        for nid, kids in children.items():
            if kids:
                total = sum(by_id[k].prob for k in kids)
                if total != 1:
                    raise TreeError(
                        f"children of node {nid} have probabilities summing to {total}")
            elif by_id[nid].time != horizon:
                raise TreeError(f"node {nid} is a leaf before the horizon")
        self._nodes = nodes
        self._by_id = by_id
        self._children = {k: tuple(v) for k, v in children.items()}
        # reachable from the root (rules out cycles among the parent links)
        seen, stack = set(), [roots[0].id]
        while stack:
            v = stack.pop()
            seen.add(v)
            stack.extend(self._children[v])
        if len(seen) != len(nodes):
            raise TreeError("tree is not connected to the root")

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int | None, Number]]) -> ScenarioTree:
        """Build from ``(id, parent, conditional probability)`` triples."""
        edges = list(edges)
        parent = {e[0]: e[1] for e in edges}
        times: dict[int, int] = {}

        def time_of(v: int, depth: int = 0) -> int:
            if v in times:
                return times[v]
            if depth > len(edges):
                raise TreeError("cycle in parent links")
            p = parent.get(v)
            if v not in parent:
                raise TreeError(f"unknown node {v}")
            times[v] = 0 if p is None else time_of(p, depth + 1) + 1
            return times[v]

        return cls(Node(i, p, time_of(i), as_fraction(q)) for i, p, q in edges)

    @classmethod
    def from_branching(cls, branch_probs: Iterable[Iterable[Number]] | Callable[[int, int], Iterable[Number]],
                       horizon: int | None = None) -> ScenarioTree:
        """Recombination-free tree with identical branching at every node.

        ``branch_probs`` is either a list of per-level probability vectors or
        a callable ``(node_id, time) -> probabilities``.  Ids are assigned in
        breadth-first order starting from 0.
        """
        if callable(branch_probs):
            if horizon is None:
                raise TreeError("horizon required with a callable")
            probs_at = branch_probs
        else:
            levels = [list(p) for p in branch_probs]
            horizon = len(levels)
            probs_at = lambda nid, t: levels[t]  # noqa: E731
        edges = [(0, None, 1)]
        frontier = [0]
        next_id = 1
        for t in range(horizon):
            new = []
            for v in frontier:
                for q in probs_at(v, t):
                    edges.append((next_id, v, q))
                    new.append(next_id)
                    next_id += 1
            frontier = new
        return cls.from_edges(edges)

    # -- basic structure -----------------------------------------------------
    @property
    def nodes(self) -> tuple[Node, ...]:
        return self._nodes

    def node(self, nid: int) -> Node:
        return self._by_id[nid]

    def __contains__(self, nid) -> bool:
        return nid in self._by_id

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other) -> bool:
        return isinstance(other, ScenarioTree) and self._nodes == other._nodes

    def __hash__(self) -> int:
        return hash(self._nodes)

    def __repr__(self) -> str:
        return f"ScenarioTree(nodes={len(self)}, horizon={self.horizon})"

    @cached_property
    def root(self) -> int:
        return next(n.id for n in self._nodes if n.parent is None)

    @cached_property
    def horizon(self) -> int:
        return max(n.time for n in self._nodes)

    def children(self, nid: int) -> tuple[int, ...]:
        return self._children[nid]

    def parent(self, nid: int) -> int | None:
        return self._by_id[nid].parent

    def time(self, nid: int) -> int:
        return self._by_id[nid].time

    def is_leaf(self, nid: int) -> bool:
        return not self._children[nid]

    @cached_property
    def ids(self) -> tuple[int, ...]:
        """Node ids in breadth-first (time, id) order."""
        return tuple(n.id for n in sorted(self._nodes, key=lambda n: (n.time, n.id)))

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(v for v in self.ids if not self._children[v])

    @cached_property
    def internal(self) -> tuple[int, ...]:
        """Non-leaf nodes: the cells on which predictable controls live."""
        return tuple(v for v in self.ids if self._children[v])

    def nodes_at(self, t: int) -> tuple[int, ...]:
        return self._levels[t]

    @cached_property
    def _levels(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.horizon + 1)]
        for v in self.ids:
            out[self.time(v)].append(v)
        return tuple(tuple(x) for x in out)

    @cached_property
    def _paths(self) -> dict[int, tuple[int, ...]]:
        paths = {self.root: (self.root,)}
        for v in self.ids:
            for c in self._children[v]:
                paths[c] = paths[v] + (c,)
        return paths

    def path(self, nid: int) -> tuple[int, ...]:
        """Node ids from the root down to ``nid`` inclusive."""
        return self._paths[nid]

    def ancestor_at(self, nid: int, t: int) -> int:
        return self._paths[nid][t]

    @cached_property
    def _uncond(self) -> dict[int, Fraction]:
        out = {self.root: Fraction(1)}
        for v in self.ids:
            for c in self._children[v]:
                out[c] = out[v] * self._by_id[c].prob
        return out

    def prob(self, nid: int) -> Fraction:
        """Unconditional probability of the atom ``nid``."""
        return self._uncond[nid]

    def cond_prob(self, nid: int) -> Fraction:
        return self._by_id[nid].prob

    @cached_property
    def _leaves_below(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, tuple[int, ...]] = {}
        for v in reversed(self.ids):
            kids = self._children[v]
            out[v] = (v,) if not kids else tuple(x for c in kids for x in out[c])
        return out

    def leaves_below(self, nid: int) -> tuple[int, ...]:
        return self._leaves_below[nid]

    def descendants(self, nid: int) -> tuple[int, ...]:
        out, stack = [], [nid]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self._children[v]))
        return tuple(out)

    @cached_property
    def min_leaf_prob(self) -> Fraction:
        return min(self.prob(w) for w in self.leaves)

    def check_same(self, other: ScenarioTree) -> None:
        if other is not self and other != self:
            raise TreeError("processes live on different trees")


# -- processes ---------------------------------------------------------------

class _NodeMap:
    """Shared machinery for node-indexed vector-valued objects."""

    __slots__ = ("tree", "values", "dim")
    _domain = "nodes"

    def __init__(self, tree: ScenarioTree, values: Mapping, dim: int | None = None):
        domain = self._domain_ids(tree)
        vals: dict[int, Vector] = {}
        for nid in domain:
            if nid not in values:
                raise TreeError(f"{type(self).__name__}: missing value at node {nid}")
            vals[nid] = as_vector(values[nid])
        extra = set(values) - set(domain)
        if extra:
            raise TreeError(f"{type(self).__name__}: values given off its domain: {sorted(extra)}")
        dims = {len(v) for v in vals.values()}
        if len(dims) > 1:
            raise TreeError("inconsistent dimensions")
        d = dims.pop() if dims else (dim or 1)
        if dim is not None and d != dim:
            raise TreeError(f"expected dimension {dim}, got {d}")
        if d < 1:
            raise TreeError("dimension must be >= 1")
        self.tree = tree
        self.values = vals
        self.dim = d

    @classmethod
    def _domain_ids(cls, tree: ScenarioTree) -> tuple[int, ...]:
        return tree.ids

    @classmethod
    def constant(cls, tree: ScenarioTree, c=Fraction(0), dim: int = 1):
        v = as_vector(c)
        if len(v) == 1 and dim > 1:
            v = v * dim
        return cls(tree, {nid: v for nid in cls._domain_ids(tree)})

    @classmethod
    def from_function(cls, tree: ScenarioTree, fn: Callable[[int], object]):
        return cls(tree, {nid: fn(nid) for nid in cls._domain_ids(tree)})

    def __getitem__(self, nid: int) -> Vector:
        return self.values[nid]

    def scalar(self, nid: int) -> Fraction:
        if self.dim != 1:
            raise TreeError("scalar access on a vector-valued object")
        return self.values[nid][0]

    def component(self, i: int):
        return type(self)(self.tree, {k: (v[i],) for k, v in self.values.items()})

    def map(self, fn: Callable[[Vector], object]):
        return type(self)(self.tree, {k: fn(v) for k, v in self.values.items()})

    def _zip(self, other, fn):
        if not isinstance(other, _NodeMap):
            c = as_vector(other)
            if len(c) == 1:
                c = c * self.dim
            return type(self)(self.tree, {k: tuple(fn(a, b) for a, b in zip(v, c))
                                          for k, v in self.values.items()})
        self.tree.check_same(other.tree)
        if other.dim != self.dim:
            raise TreeError(f"dimension mismatch ({self.dim} vs {other.dim})")
        return type(self)(self.tree, {k: tuple(fn(a, b) for a, b in zip(v, other.values[k]))
                                      for k, v in self.values.items()})

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._zip(other, lambda a, b: b - a)

    def __mul__(self, other):
        """Scalar multiple, or componentwise product with a same-shaped object."""
        return self._zip(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._zip(other, lambda a, b: a / b)

    def __neg__(self):
        return self.map(lambda v: tuple(-a for a in v))

    def __eq__(self, other) -> bool:
        return (type(other) is type(self) and other.tree == self.tree
                and other.values == self.values)

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.values.items()))))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {_fmt_vec(v)}" for k, v in self.values.items())
        return f"{type(self).__name__}({{{body}}})"

    def max_abs(self) -> Fraction:
        return max((abs(a) for v in self.values.values() for a in v), default=Fraction(0))


def _fmt_vec(v: Vector) -> str:
    if len(v) == 1:
        return str(v[0])
    return "(" + ", ".join(str(a) for a in v) + ")"


class AdaptedProcess(_NodeMap):
    """A value (vector) at every node: ``X_t`` on the atom of ``F_t``."""

    __slots__ = ()

    def increment(self, nid: int) -> Vector:
        """``X_t - X_{t-1}`` at node ``nid`` (zero at the root)."""
        p = self.tree.parent(nid)
        if p is None:
            return (Fraction(0),) * self.dim
        return tuple(a - b for a, b in zip(self.values[nid], self.values[p]))

    def initial(self) -> Vector:
        return self.values[self.tree.root]

    def terminal(self, component: int = 0) -> TerminalVariable:
        return TerminalVariable(self.tree, {w: self.values[w][component] for w in self.tree.leaves})

    def lagged(self) -> PredictableControl:
        """``X_-``: the value at ``t-1`` used over the period ``(t-1, t]``."""
        return PredictableControl(self.tree, {v: self.values[v] for v in self.tree.internal})

    def path_values(self, leaf: int, component: int = 0) -> list[Fraction]:
        return [self.values[v][component] for v in self.tree.path(leaf)]

    def running_max_abs(self, leaf: int) -> Fraction:
        """``|X|^*_T`` along the path ending at ``leaf`` (max over components)."""
        return max(abs(a) for v in self.tree.path(leaf) for a in self.values[v])

    def dot(self, other: AdaptedProcess) -> AdaptedProcess:
        self.tree.check_same(other.tree)
        return AdaptedProcess(self.tree, {k: sum((a * b for a, b in zip(v, other.values[k])), Fraction(0))
                                          for k, v in self.values.items()})

    def reciprocal(self) -> AdaptedProcess:
        return self.map(lambda v: tuple(1 / a for a in v))

    def is_martingale(self) -> bool:
        return all(self.drift(v) == (0,) * self.dim for v in self.tree.internal)

    def is_supermartingale(self) -> bool:
        return all(all(x <= 0 for x in self.drift(v)) for v in self.tree.internal)

    def drift(self, nid: int) -> Vector:
        """Conditional mean of the next increment, ``E[X_{t+1} - X_t | node]``."""
        kids = self.tree.children(nid)
        acc = [Fraction(0)] * self.dim
        x = self.values[nid]
        for c in kids:
            p = self.tree.cond_prob(c)
            for i, (a, b) in enumerate(zip(self.values[c], x)):
                acc[i] += p * (a - b)
        return tuple(acc)


class PredictableControl(_NodeMap):
    """Position held over ``(t-1, t]``, indexed by the node at time ``t-1``."""

    __slots__ = ()

    @classmethod
    def _domain_ids(cls, tree: ScenarioTree) -> tuple[int, ...]:
        return tree.internal


class TerminalVariable(_NodeMap):
    """A scalar random variable measurable w.r.t. ``F_T`` (one value per leaf)."""

    __slots__ = ()

    @classmethod
    def _domain_ids(cls, tree: ScenarioTree) -> tuple[int, ...]:
        return tree.leaves

    def __init__(self, tree, values, dim=None):
        super().__init__(tree, values, dim)
        if self.dim != 1:
            raise TreeError("terminal variables are scalar")

    def __getitem__(self, nid: int) -> Fraction:  # scalar by construction
        return self.values[nid][0]

    def expectation(self, weights: Mapping[int, Fraction] | None = None) -> Fraction:
        tree = self.tree
        if weights is None:
            return sum((tree.prob(w) * self[w] for w in tree.leaves), Fraction(0))
        return sum((weights[w] * self[w] for w in tree.leaves), Fraction(0))

    def as_dict(self) -> dict[int, Fraction]:
        return {w: self[w] for w in self.tree.leaves}


@dataclass(frozen=True)
class StoppingTimeSpec:
    """``tau`` = first time the path enters ``stop_set``; ``T + 1`` encodes infinity."""

    tree: ScenarioTree
    stop_set: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "stop_set", frozenset(self.stop_set))
        bad = [v for v in self.stop_set if v not in self.tree]
        if bad:
            raise TreeError(f"stop set contains unknown nodes {bad}")

    @classmethod
    def never(cls, tree: ScenarioTree) -> StoppingTimeSpec:
        return cls(tree, frozenset())

    @classmethod
    def at_time(cls, tree: ScenarioTree, t: int) -> StoppingTimeSpec:
        return cls(tree, frozenset(tree.nodes_at(t)))

    @property
    def infinity(self) -> int:
        return self.tree.horizon + 1

    def stop_node(self, nid: int) -> int | None:
        """First node of the stop set on the path to ``nid``, if any."""
        for v in self.tree.path(nid):
            if v in self.stop_set:
                return v
        return None

    def value(self, nid: int) -> int:
        """``tau`` on the atom ``nid`` if it is already decided there, else ``T + 1``."""
        v = self.stop_node(nid)
        return self.infinity if v is None else self.tree.time(v)

    def on_leaf(self, leaf: int) -> int:
        return self.value(leaf)


# -- operations ----------------------------------------------------------------

def conditional_expectation(tree: ScenarioTree, xi: TerminalVariable, t: int) -> dict[int, Fraction]:
    """``E[xi | F_t]`` as a map from time-``t`` node ids to exact values."""
    tree.check_same(xi.tree)
    if not 0 <= t <= tree.horizon:
        raise TreeError(f"time {t} outside [0, {tree.horizon}]")
    out = {}
    for v in tree.nodes_at(t):
        pv = tree.prob(v)
        out[v] = sum((tree.prob(w) * xi[w] for w in tree.leaves_below(v)), Fraction(0)) / pv
    return out


def martingale_closure(xi: TerminalVariable) -> AdaptedProcess:
    """The martingale ``t -> E[xi | F_t]`` on every node at once (backward recursion)."""
    tree = xi.tree
    vals: dict[int, Fraction] = {}
    for v in reversed(tree.ids):
        kids = tree.children(v)
        if not kids:
            vals[v] = xi[v]
        else:
            vals[v] = sum((tree.cond_prob(c) * vals[c] for c in kids), Fraction(0))
    return AdaptedProcess(tree, vals)


def stopped_process(X: AdaptedProcess, tau: StoppingTimeSpec) -> AdaptedProcess:
    """``X^tau_t = X_{t ^ tau}`` pathwise."""
    X.tree.check_same(tau.tree)
    vals = {}
    for v in X.tree.ids:
        s = tau.stop_node(v)
        vals[v] = X[v] if s is None else X[s]
    return AdaptedProcess(X.tree, vals)
