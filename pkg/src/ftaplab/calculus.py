"""Discrete stochastic calculus on scenario trees.

Integrals, the Doob decomposition, the big-jump split ``X = X_0 + B + M + Xcheck``,
variations, the cadlag modulus of a grid path, and slicing stopping times.
In discrete time the Doob decomposition plays the role of the canonical
decomposition of a special semimartingale: it is exact and unique.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

from .tree import (AdaptedProcess, PredictableControl, ScenarioTree,
                   StoppingTimeSpec, TreeError, as_fraction)

__all__ = [
    "Decomposition", "stochastic_integral", "doob_decomposition", "big_jump_split",
    "jump_magnitudes", "jump_threshold", "variation", "covariation",
    "integration_by_parts", "cadlag_modulus", "slicing_times",
]


def stochastic_integral(H: PredictableControl, X: AdaptedProcess) -> AdaptedProcess:
    """``(H . X)_t = sum_{s <= t} <H_s, X_s - X_{s-1}>``, started at 0."""
    X.tree.check_same(H.tree)
    if H.dim != X.dim:
        raise TreeError(f"integrand has dimension {H.dim}, integrator {X.dim}")
    tree = X.tree
    vals = {tree.root: Fraction(0)}
    for v in tree.internal:
        h = H[v]
        xv = X[v]
        base = vals[v]
        for c in tree.children(v):
            xc = X[c]
            vals[c] = base + sum((a * (b - e) for a, b, e in zip(h, xc, xv)), Fraction(0))
    return AdaptedProcess(tree, vals)


def doob_decomposition(X: AdaptedProcess) -> tuple[AdaptedProcess, AdaptedProcess]:
    """Return ``(M, B)`` with ``X = X_0 + M + B``, M a martingale, B predictable.

    ``Delta B`` at a child of ``v`` is the conditional mean of the increment
    at ``v``; both parts start at 0.
    """
    tree = X.tree
    zero = (Fraction(0),) * X.dim
    B = {tree.root: zero}
    M = {tree.root: zero}
    for v in tree.internal:
        drift = X.drift(v)
        bv, mv = B[v], M[v]
        for c in tree.children(v):
            inc = X.increment(c)
            B[c] = tuple(b + d for b, d in zip(bv, drift))
            M[c] = tuple(m + i - d for m, i, d in zip(mv, inc, drift))
    return AdaptedProcess(tree, M), AdaptedProcess(tree, B)


@dataclass(frozen=True)
class Decomposition:
    """``X - X_0 = B + M + Xcheck`` with jumps above ``threshold`` collected in Xcheck."""

    threshold: Fraction
    B: AdaptedProcess
    M: AdaptedProcess
    Xcheck: AdaptedProcess
    collision: bool = False  # some |Delta X| equals the threshold

    def reconstruct(self) -> AdaptedProcess:
        return self.B + self.M + self.Xcheck

    def check(self, X: AdaptedProcess) -> list[str]:
        """List every violated invariant (empty when the split is sound)."""
        problems = []
        tree = X.tree
        x0 = X.initial()
        rec = self.reconstruct()
        C = self.threshold
        for v in tree.ids:
            if rec[v] != tuple(a - b for a, b in zip(X[v], x0)):
                problems.append(f"reconstruction fails at node {v}")
        for v in tree.internal:
            kids = tree.children(v)
            dB = {self.B.increment(c) for c in kids}
            if len(dB) != 1:
                problems.append(f"B not predictable at node {v}")
            if any(d != 0 for d in self.M.drift(v)):
                problems.append(f"M has nonzero drift at node {v}")
            for c in kids:
                dx = X.increment(c)
                dxc = self.Xcheck.increment(c)
                want = tuple(a if abs(a) > C else Fraction(0) for a in dx)
                if dxc != want:
                    problems.append(f"Xcheck jump wrong at node {c}")
                if any(abs(a) > 2 * C for a in self.M.increment(c)):
                    problems.append(f"|Delta M| > 2C at node {c}")
                if any(abs(a) > C for a in self.B.increment(c)):
                    problems.append(f"|Delta B| > C at node {c}")
        return problems


def big_jump_split(X: AdaptedProcess, C) -> Decomposition:
    """Split off jumps with ``|Delta X| > C`` and Doob-decompose the remainder.

    Works componentwise for vector processes.
    """
    C = as_fraction(C)
    if C <= 0:
        raise ValueError("threshold must be positive")
    tree = X.tree
    zero = (Fraction(0),) * X.dim
    check = {tree.root: zero}
    collision = False
    for v in tree.ids[1:] if len(tree) > 1 else ():
        inc = X.increment(v)
        collision = collision or any(abs(a) == C for a in inc)
        check[v] = tuple(p + (a if abs(a) > C else 0)
                         for p, a in zip(check[tree.parent(v)], inc))
    Xcheck = AdaptedProcess(tree, check)
    M, B = doob_decomposition(X - Xcheck)
    return Decomposition(C, B, M, Xcheck, collision)


def jump_magnitudes(*processes: AdaptedProcess) -> set[Fraction]:
    out = set()
    for X in processes:
        for v in X.tree.ids:
            if X.tree.parent(v) is None:
                continue
            out.update(abs(a) for a in X.increment(v) if a != 0)
    return out


def _midpoint_rule(mags: Sequence[Fraction]) -> Fraction:
    if not mags:
        return Fraction(1)
    if len(mags) == 1:
        return mags[0] / 2
    j = (len(mags) + 1) // 2  # 1-based index of the lower neighbour of the median
    return (mags[j - 1] + mags[j]) / 2


def jump_threshold(X: AdaptedProcess | Sequence[AdaptedProcess]) -> Fraction:
    """A threshold ``C > 0`` that no jump magnitude of the input(s) equals.

    The rule is applied to the distinct magnitudes of the first process (the
    reference, typically a limit): midpoint of the two magnitudes straddling
    the median, half the magnitude if there is only one, 1 if there are no
    jumps.  With a list, ``C`` is then nudged upward until it avoids every
    magnitude of every process.
    """
    procs = [X] if isinstance(X, AdaptedProcess) else list(X)
    if not procs:
        raise ValueError("need at least one process")
    C = _midpoint_rule(sorted(jump_magnitudes(procs[0])))
    every = jump_magnitudes(*procs)
    while C in every:
        above = [m for m in every if m > C]
        C = (C + min(above)) / 2 if above else C + 1
    return C


def variation(X: AdaptedProcess, kind: Literal["total", "quadratic"] = "total") -> AdaptedProcess:
    """Running total variation ``sum |Delta X|`` or quadratic variation ``sum (Delta X)^2``."""
    if kind not in ("total", "quadratic"):
        raise ValueError(f"unknown variation kind {kind!r}")
    tree = X.tree
    f = (lambda a: abs(a)) if kind == "total" else (lambda a: a * a)
    vals = {tree.root: (Fraction(0),) * X.dim}
    for v in tree.internal:
        for c in tree.children(v):
            vals[c] = tuple(p + f(a) for p, a in zip(vals[v], X.increment(c)))
    return AdaptedProcess(tree, vals)


def covariation(X: AdaptedProcess, Y: AdaptedProcess) -> AdaptedProcess:
    """``[X, Y]_t = sum_{s <= t} Delta X_s Delta Y_s`` (componentwise)."""
    X.tree.check_same(Y.tree)
    if X.dim != Y.dim:
        raise TreeError("dimension mismatch")
    tree = X.tree
    vals = {tree.root: (Fraction(0),) * X.dim}
    for v in tree.internal:
        for c in tree.children(v):
            vals[c] = tuple(p + a * b for p, a, b in zip(vals[v], X.increment(c), Y.increment(c)))
    return AdaptedProcess(tree, vals)


def integration_by_parts(U: AdaptedProcess, V: AdaptedProcess
                         ) -> tuple[AdaptedProcess, AdaptedProcess, AdaptedProcess]:
    """``(U_- . V, V_- . U, [U, V])``; the three sum to ``UV - U_0 V_0``.

    Scalar processes only.
    """
    if U.dim != 1 or V.dim != 1:
        raise TreeError("integration by parts is implemented for scalar processes")
    return (stochastic_integral(U.lagged(), V),
            stochastic_integral(V.lagged(), U),
            covariation(U, V))


def cadlag_modulus(path: Sequence, delta) -> Fraction:
    """Exact ``w'(f, delta)`` for the step function of ``path`` on ``[0, 1]``.

    Grid point ``k`` sits at ``k / n`` with ``n = len(path) - 1``; the path is
    right-continuous and constant between grid points.  Partitions use grid
    points only and cells are half-open, so the value at time 1 lies in no
    cell.  Solved by dynamic programming over the last partition point.
    """
    xs = [as_fraction(x) for x in path]
    if not xs:
        raise ValueError("empty path")
    delta = as_fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = len(xs) - 1
    if n == 0:
        return Fraction(0)
    if delta > 1:
        raise ValueError("delta exceeds the time span")
    # smallest number of grid steps a cell must span
    min_steps = -(-delta.numerator * n // delta.denominator)  # ceil(delta * n)
    INF = None
    best: list[Fraction | None] = [INF] * (n + 1)
    best[0] = Fraction(0)
    for b in range(1, n + 1):
        lo = hi = xs[b - 1]
        cand = INF
        # cell [a, b) covers xs[a..b-1]; grow it leftward
        for a in range(b - 1, -1, -1):
            x = xs[a]
            if x < lo:
                lo = x
            elif x > hi:
                hi = x
            if b - a < min_steps or best[a] is INF:
                continue
            val = max(best[a], hi - lo)
            if cand is INF or val < cand:
                cand = val
        best[b] = cand
    if best[n] is INF:
        raise ValueError("no admissible partition")
    return best[n]


def slicing_times(N: AdaptedProcess, eps) -> list[StoppingTimeSpec]:
    """``T_0 = 0``, ``T_{i+1}`` = first time after ``T_i`` with ``|N_t - N_{T_i}| >= eps``.

    Returned as node-based stopping times; the list stops at the first empty
    stop set.  Scalar ``N`` only.
    """
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if N.dim != 1:
        raise TreeError("slicing times need a scalar process")
    tree = N.tree
    # hits[v]: number of stopping times already reached on the path to v
    # (T_0 counts), anchor[v]: N at the most recent one.
    hits = {tree.root: 1}
    anchor = {tree.root: N.scalar(tree.root)}
    sets: list[set[int]] = [{tree.root}]
    for v in tree.ids:
        for c in tree.children(v):
            x = N.scalar(c)
            if abs(x - anchor[v]) >= eps:
                hits[c] = hits[v] + 1
                anchor[c] = x
                while len(sets) < hits[c]:
                    sets.append(set())
                sets[hits[c] - 1].add(c)
            else:
                hits[c] = hits[v]
                anchor[c] = anchor[v]
    return [StoppingTimeSpec(tree, frozenset(s)) for s in sets]
