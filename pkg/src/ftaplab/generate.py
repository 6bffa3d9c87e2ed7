"""Seeded random scenario trees, market models and admissible strategies."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .calculus import stochastic_integral
from .market import MarketModel, WealthProcess, wealth
from .tree import AdaptedProcess, Node, PredictableControl, ScenarioTree

__all__ = ["ModelParams", "generate_random_model", "random_tree", "random_strategy",
           "random_admissible_sequence"]

_PROB_WEIGHTS = range(1, 7)  # probabilities are normalized small-integer weights
_MAX_LEAVES = 3 ** 12


@dataclass(frozen=True)
class ModelParams:
    depth: int = 2
    branching: int = 2
    dim: int = 1
    price_range: int = 4  # increments drawn from {-r..r} / 2
    constraint_density: float = 0.0
    emm_first: bool = False
    floor: Fraction = Fraction(1)


def _weights(rng: random.Random, k: int) -> list[Fraction]:
    w = [rng.choice(_PROB_WEIGHTS) for _ in range(k)]
    s = sum(w)
    return [Fraction(a, s) for a in w]


def random_tree(rng: random.Random, depth: int, branching: int) -> ScenarioTree:
    """Each internal node gets between 2 and ``branching`` children (1 if branching is 1)."""
    if branching ** depth > _MAX_LEAVES:
        raise ValueError("tree exceeds the enumeration budget")
    nodes = [Node(0, None, 0, Fraction(1))]
    frontier = [0]
    for t in range(1, depth + 1):
        nxt = []
        for v in frontier:
            k = 1 if branching == 1 else rng.randint(2, branching)
            for p in _weights(rng, k):
                nid = len(nodes)
                nodes.append(Node(nid, v, t, p))
                nxt.append(nid)
        frontier = nxt
    return ScenarioTree(nodes)


def _random_cone(rng: random.Random, d: int) -> list[tuple[int, ...]]:
    if d == 1:
        return rng.choice([[(1,)], [(-1,)], []])
    base = [
        [(1,) + (0,) * (d - 1)],
        [tuple(1 if i == j else 0 for i in range(d)) for j in range(d)],
        [(1,) + (0,) * (d - 1), (-1,) + (0,) * (d - 1), (0, 1) + (0,) * (d - 2)],
    ]
    choice = rng.randrange(len(base) + 1)
    if choice < len(base):
        return base[choice]
    rays = set()
    while len(rays) < rng.randint(1, 3):
        r = tuple(rng.randint(-1, 1) for _ in range(d))
        if any(r):
            rays.add(r)
    return sorted(rays)


def generate_random_model(seed: int, params: ModelParams = ModelParams()) -> MarketModel:
    """Random model; deterministic in ``seed``.

    With ``emm_first`` a measure ``Q`` is drawn at every node and the last
    child's increment is solved for so that prices are ``Q``-martingales,
    which guarantees a separating measure exists.
    """
    rng = random.Random(seed)
    tree = random_tree(rng, params.depth, params.branching)
    d = params.dim
    r = params.price_range
    S = {tree.root: tuple(Fraction(rng.randint(2, 2 * r), 2) for _ in range(d))}
    for v in tree.internal:
        kids = tree.children(v)
        incs = [[Fraction(rng.randint(-r, r), 2) for _ in range(d)] for _ in kids]
        if params.emm_first:
            q = _weights(rng, len(kids))
            for i in range(d):
                head = sum((q[j] * incs[j][i] for j in range(len(kids) - 1)), Fraction(0))
                incs[-1][i] = -head / q[-1]
        for c, inc in zip(kids, incs):
            S[c] = tuple(a + b for a, b in zip(S[v], inc))
    cones = {}
    for v in tree.internal:
        if rng.random() < params.constraint_density:
            cones[v] = _random_cone(rng, d)
    return MarketModel(AdaptedProcess(tree, S, d), cones, params.floor)


def random_strategy(model: MarketModel, rng: random.Random, scale: int = 2) -> PredictableControl:
    """Random cone-respecting strategy with small rational coefficients."""
    vals = {}
    for v in model.tree.internal:
        acc = [Fraction(0)] * model.dim
        for col in model.columns(v):
            lo = -scale if col.free else 0
            w = Fraction(rng.randint(lo * 4, scale * 4), 4)
            for i, a in enumerate(col.ray):
                acc[i] += w * a
        vals[v] = tuple(acc)
    return PredictableControl(model.tree, vals, model.dim)


def scale_to_floor(model: MarketModel, phi: PredictableControl) -> PredictableControl:
    """Shrink ``phi`` so that its wealth stays above ``-floor``."""
    W = stochastic_integral(phi, model.S)
    low = min(W.scalar(v) for v in model.tree.ids)
    if low < -model.floor and model.floor > 0:
        return phi * (model.floor / -low)
    if low < 0 and model.floor == 0:
        return phi * 0
    return phi


def random_admissible_sequence(model: MarketModel, rng: random.Random, n: int) -> list[WealthProcess]:
    """``n`` floor-admissible wealth processes from random strategies."""
    out = []
    for _ in range(n):
        phi = scale_to_floor(model, random_strategy(model, rng))
        w = wealth(model, phi, check_cone=False)
        assert w.admissible
        out.append(w)
    return out
