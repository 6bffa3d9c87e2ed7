"""Line-oriented text format for scenario trees, processes and cones.

::

    FTAPLAB TREE 1
    # comment
    node 0 - 1/1
    node 1 0 1/2
    node 2 0 1/2
    proc S 1 0 1/1
    proc S 1 1 2/1
    proc S 1 2 1/2
    cone 0 1/1

Rationals are written ``p/q`` in lowest terms with ``q >= 1`` (so zero is
``0/1``).  A ``cone`` line adds one generator ray at an internal node; a bare
``cone <id>`` line marks the node as constrained without adding a ray, so a
node with only the bare line allows no trading.  Nodes without cone lines are
unconstrained.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

from .market import MarketModel
from .tree import AdaptedProcess, Node, ScenarioTree, TreeError

HEADER = "FTAPLAB TREE 1"
PRICE = "S"

_RAT = re.compile(r"(-?)(0|[1-9][0-9]*)/([1-9][0-9]*)")
_INT = re.compile(r"0|[1-9][0-9]*")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_rational(tok: str, line: int | None = None) -> Fraction:
    m = _RAT.fullmatch(tok)
    if not m:
        raise ParseError(f"expected a rational p/q, got {tok!r}", line)
    sign, p, q = m.group(1), int(m.group(2)), int(m.group(3))
    if gcd(p, q) != 1 or (p == 0 and (q != 1 or sign)):
        raise ParseError(f"non-canonical rational {tok!r}", line)
    return Fraction(-p if sign else p, q)


def _parse_id(tok: str, line: int) -> int:
    if not _INT.fullmatch(tok):
        raise ParseError(f"expected a nonnegative integer id, got {tok!r}", line)
    return int(tok)


@dataclass
class TreeFile:
    tree: ScenarioTree
    processes: dict[str, AdaptedProcess] = field(default_factory=dict)
    cones: dict[int, list[tuple[Fraction, ...]]] = field(default_factory=dict)

    def to_model(self, floor=1, price: str = PRICE) -> MarketModel:
        if price not in self.processes:
            raise ParseError(f"no price process named {price!r}")
        return MarketModel(self.processes[price], self.cones, floor)

    @classmethod
    def from_model(cls, model: MarketModel, extra: dict[str, AdaptedProcess] | None = None) -> TreeFile:
        procs = {PRICE: model.S}
        procs.update(extra or {})
        return cls(model.tree, procs, {v: list(r) for v, r in model.cones.items()})

    def process(self, name: str) -> AdaptedProcess:
        try:
            return self.processes[name]
        except KeyError:
            raise ParseError(f"no process named {name!r}") from None


def parse_tree_file(text: str) -> TreeFile:
    """Parse and validate; every error carries the offending line number."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != HEADER:
        raise ParseError(f"bad header, expected {HEADER!r}", 1)
    nodes: dict[int, tuple[int | None, Fraction, int]] = {}
    procs: dict[str, tuple[int, dict[int, tuple[Fraction, ...]], int]] = {}
    cones: dict[int, list[tuple[Fraction, ...]]] = {}
    cone_lines: dict[int, int] = {}
    for ln, raw in enumerate(lines[1:], start=2):
        s = raw.rstrip("\r")
        if not s.strip() or s.lstrip().startswith("#"):
            continue
        tok = s.split()
        kind = tok[0]
        if kind == "node":
            if len(tok) != 4:
                raise ParseError("node lines read 'node <id> <parent|-> <p/q>'", ln)
            nid = _parse_id(tok[1], ln)
            if nid in nodes:
                raise ParseError(f"duplicate node id {nid}", ln)
            parent = None if tok[2] == "-" else _parse_id(tok[2], ln)
            p = parse_rational(tok[3], ln)
            if parent is None and p != 1:
                raise ParseError("the root must have probability 1/1", ln)
            if parent is not None and p <= 0:
                raise ParseError("branch probabilities must be positive", ln)
            nodes[nid] = (parent, p, ln)
        elif kind == "proc":
            if len(tok) < 5:
                raise ParseError("proc lines read 'proc <name> <dim> <node> <v1> ...'", ln)
            name = tok[1]
            dim = _parse_id(tok[2], ln)
            if dim < 1:
                raise ParseError("process dimension must be at least 1", ln)
            nid = _parse_id(tok[3], ln)
            vals = tuple(parse_rational(t, ln) for t in tok[4:])
            if len(vals) != dim:
                raise ParseError(f"expected {dim} values, got {len(vals)}", ln)
            d0, table, _ = procs.setdefault(name, (dim, {}, ln))
            if d0 != dim:
                raise ParseError(f"process {name} changes dimension from {d0} to {dim}", ln)
            if nid in table:
                raise ParseError(f"process {name} given twice at node {nid}", ln)
            table[nid] = vals
        elif kind == "cone":
            if len(tok) < 2:
                raise ParseError("cone lines read 'cone <node> [r1 ...]'", ln)
            nid = _parse_id(tok[1], ln)
            rays = cones.setdefault(nid, [])
            cone_lines.setdefault(nid, ln)
            if len(tok) > 2:
                rays.append(tuple(parse_rational(t, ln) for t in tok[2:]))
        else:
            raise ParseError(f"unknown line kind {kind!r}", ln)
    if not nodes:
        raise ParseError("no nodes", len(lines))
    tree = _build_tree(nodes)
    processes = {}
    for name, (dim, table, ln0) in procs.items():
        for nid in table:
            if nid not in nodes:
                raise ParseError(f"process {name} given at unknown node {nid}", ln0)
        missing = [v for v in tree.ids if v not in table]
        if missing:
            raise ParseError(f"process {name} missing at nodes {missing}", ln0)
        processes[name] = AdaptedProcess(tree, table, dim)
    for nid, rays in cones.items():
        ln = cone_lines[nid]
        if nid not in nodes or tree.is_leaf(nid):
            raise ParseError(f"cone at {nid}, which is not an internal node", ln)
        price = processes.get(PRICE)
        for r in rays:
            if price is not None and len(r) != price.dim:
                raise ParseError(f"cone ray at node {nid} has dimension {len(r)}, prices have {price.dim}", ln)
            if not any(r):
                raise ParseError(f"zero cone ray at node {nid}", ln)
    return TreeFile(tree, processes, cones)


def _build_tree(nodes: dict[int, tuple[int | None, Fraction, int]]) -> ScenarioTree:
    roots = [v for v, (p, _, _) in nodes.items() if p is None]
    if len(roots) != 1:
        ln = nodes[roots[1]][2] if len(roots) > 1 else 2
        raise ParseError(f"expected exactly one root, found {len(roots)}", ln)
    children: dict[int, list[int]] = {v: [] for v in nodes}
    for v, (parent, _, ln) in nodes.items():
        if parent is None:
            continue
        if parent not in nodes:
            raise ParseError(f"orphan node {v}: parent {parent} is not defined", ln)
        children[parent].append(v)
    times = {roots[0]: 0}
    stack = [roots[0]]
    while stack:
        v = stack.pop()
        for c in children[v]:
            times[c] = times[v] + 1
            stack.append(c)
    for v, (_, _, ln) in nodes.items():
        if v not in times:
            raise ParseError(f"node {v} is not connected to the root", ln)
    horizon = max(times.values())
    for v, kids in children.items():
        if kids:
            total = sum(nodes[c][1] for c in kids)
            if total != 1:
                raise ParseError(f"children of node {v} have probabilities summing to "
                                 f"{format_rational(total)}", nodes[v][2])
        elif times[v] != horizon:
            raise ParseError(f"node {v} is a leaf before the horizon {horizon}", nodes[v][2])
    try:
        return ScenarioTree(Node(v, p, times[v], q) for v, (p, q, _) in nodes.items())
    except TreeError as exc:  # pragma: no cover - checks above are the same
        raise ParseError(str(exc)) from exc


def render_tree_file(tf: TreeFile) -> str:
    """Canonical rendering: nodes in breadth-first order, then processes, then cones."""
    tree = tf.tree
    out = [HEADER]
    for v in tree.ids:
        parent = tree.parent(v)
        p = tree.node(v).prob
        out.append(f"node {v} {'-' if parent is None else parent} {format_rational(p)}")
    for name, X in tf.processes.items():
        for v in tree.ids:
            out.append(f"proc {name} {X.dim} {v} " + " ".join(format_rational(a) for a in X[v]))
    for v in sorted(tf.cones):
        rays = tf.cones[v]
        if not rays:
            out.append(f"cone {v}")
        for r in rays:
            out.append(f"cone {v} " + " ".join(format_rational(Fraction(a)) for a in r))
    return "\n".join(out) + "\n"


def read_tree_file(path) -> TreeFile:
    with open(path, encoding="utf-8") as fh:
        return parse_tree_file(fh.read())


def write_tree_file(path, tf: TreeFile) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_tree_file(tf))
