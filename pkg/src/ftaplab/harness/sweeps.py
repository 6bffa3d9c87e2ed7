"""Seeded sweeps behind the acceptance suite.

Each sweep returns one or more :class:`ExperimentReport`; per-seed work can be
spread over processes with ``workers > 1`` and is merged back in seed order,
so results do not depend on the worker count.
"""

from __future__ import annotations

import random
import time
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from ..calculus import jump_threshold, stochastic_integral
from ..duality import check_separating, esm_exists, kreps_yan_construct
from ..generate import ModelParams, generate_random_model, random_admissible_sequence, random_strategy, random_tree
from ..market import InconsistentVerdicts, MarketModel, check_nflvr, check_nupbr, wealth
from ..tree import AdaptedProcess, PredictableControl, ScenarioTree
from .convergence import ConvergenceConfig, experiment_emery_convergence, experiment_memin_slominski
from .inequalities import (
    check_burkholder_martingale,
    check_burkholder_supermartingale,
    check_doob_meyer_bound,
    check_slicing_lemma,
)
from .put import DEFAULT_GRID, experiment_nupbr_put
from .report import ExperimentReport


def _run(fn: Callable, seeds: Iterable[int], workers: int) -> list:
    seeds = list(seeds)
    if workers <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, seeds))


# -- FTAP triangle --------------------------------------------------------------

def ftap_params(seed: int) -> ModelParams:
    """Seed-dependent shape: depth <= 3, branching <= 3, d <= 2, mixed constraints."""
    rng = random.Random(10_007 * seed + 1)
    return ModelParams(
        depth=rng.randint(1, 3),
        branching=rng.randint(2, 3),
        dim=rng.randint(1, 2),
        constraint_density=rng.choice([0.0, 0.0, 0.3, 0.7]),
        emm_first=rng.random() < 0.4,
    )


@dataclass
class FTAPOutcome:
    seed: int
    nflvr: bool | None
    na_and_nupbr: bool | None
    esm: bool
    kreps_yan: bool
    ky_problems: list[str] = field(default_factory=list)
    error: str | None = None


def ftap_instance(seed: int) -> FTAPOutcome:
    model = generate_random_model(seed, ftap_params(seed))
    esm = esm_exists(model)
    ky = kreps_yan_construct(model)
    problems = []
    try:
        verdict = check_nflvr(model, cross_check=True)
        nflvr, conj = verdict.holds, verdict.na.holds and verdict.nupbr.holds
        error = None
    except InconsistentVerdicts as exc:
        nflvr = conj = None
        error = str(exc)
    if ky.exists:
        problems += check_separating(model, ky.measure.density)
    else:
        cert = ky.certificate
        if ky.failed_atom is None or cert is None or not cert.verify(model):
            problems.append("missing or invalid atom-failure certificate")
        elif cert.terminal[ky.failed_atom] <= 0:
            problems.append("certificate not positive on the failed atom")
    if not esm.exists and (esm.certificate is None or not esm.certificate.verify(model)):
        problems.append("separating-measure LP produced no valid arbitrage certificate")
    return FTAPOutcome(seed, nflvr, conj, esm.exists, ky.exists, problems, error)


def ftap_sweep(seeds: Iterable[int], workers: int = 1) -> tuple[ExperimentReport, ExperimentReport, ExperimentReport]:
    """Reports for the FTAP triangle, the NFLVR decomposition and Kreps-Yan."""
    tri = ExperimentReport("ftap-triangle")
    dec = ExperimentReport("nflvr-decomposition")
    ky = ExperimentReport("kreps-yan")
    start = time.perf_counter()
    holds = 0
    for out in _run(ftap_instance, seeds, workers):
        for rep in (tri, dec, ky):
            rep.instances += 1
        holds += bool(out.esm)
        if out.error is not None:
            dec.fail(out.seed, error=out.error)
            tri.fail(out.seed, error=out.error)
        else:
            dec.observe(0 if out.nflvr == out.na_and_nupbr == out.esm else -1, None, out.seed,
                        nflvr=out.nflvr, conj=out.na_and_nupbr, esm=out.esm)
            tri.observe(0 if out.nflvr == out.esm == out.kreps_yan else -1, None, out.seed,
                        nflvr=out.nflvr, esm=out.esm, kreps_yan=out.kreps_yan)
        if out.ky_problems:
            ky.fail(out.seed, problems="; ".join(out.ky_problems))
        else:
            ky.observe(0, None, out.seed)
    elapsed = time.perf_counter() - start
    for rep in (tri, dec, ky):
        rep.data["seconds"] = elapsed
        rep.notes.append(f"{holds} of {tri.instances} models admit a separating measure")
    return tri, dec, ky


# -- Burkholder and Doob-Meyer: exhaustive two-period binary sweep -------------

GRID_POINTS = 9  # values {0, 1/2, ..., 4}, stored in half units


def binary_supermartingales(points: int = GRID_POINTS) -> np.ndarray:
    """All ``(s0, s1u, s1d, s2uu, s2ud, s2du, s2dd)`` in half units, fair branching,
    with ``2 s_parent >= s_up + s_down`` at every node."""
    g = np.arange(points, dtype=np.int16)
    s0, a, b = np.meshgrid(g, g, g, indexing="ij")
    first = np.stack([s0.ravel(), a.ravel(), b.ravel()], axis=1)
    first = first[2 * first[:, 0] >= first[:, 1] + first[:, 2]]
    x, y = np.meshgrid(g, g, indexing="ij")
    pairs = np.stack([x.ravel(), y.ravel()], axis=1)
    sums = pairs.sum(axis=1)
    blocks = []
    for s1u in range(points):
        up = pairs[sums <= 2 * s1u]
        for s1d in range(points):
            dn = pairs[sums <= 2 * s1d]
            rows = first[(first[:, 1] == s1u) & (first[:, 2] == s1d)]
            if not len(rows):
                continue
            iu, idn = np.meshgrid(np.arange(len(up)), np.arange(len(dn)), indexing="ij")
            tail = np.concatenate([up[iu.ravel()], dn[idn.ravel()]], axis=1)
            blocks.append(np.concatenate([np.repeat(rows, len(tail), axis=0),
                                          np.tile(tail, (len(rows), 1))], axis=1))
    return np.concatenate(blocks).astype(np.int64)


VERTEX_H = tuple(product((-1, 1), repeat=3))  # (H_root, H_up, H_down)


def _leaf_running_max(S: np.ndarray, h: tuple[int, int, int]) -> np.ndarray:
    """``|(H . S)|^*`` at the four leaves, in half units."""
    h0, hu, hd = h
    d1u, d1d = S[:, 1] - S[:, 0], S[:, 2] - S[:, 0]
    i1u, i1d = h0 * d1u, h0 * d1d
    legs = [(i1u, hu, S[:, 3] - S[:, 1]), (i1u, hu, S[:, 4] - S[:, 1]),
            (i1d, hd, S[:, 5] - S[:, 2]), (i1d, hd, S[:, 6] - S[:, 2])]
    return np.stack([np.maximum(np.abs(i1), np.abs(i1 + hh * d2)) for i1, hh, d2 in legs], axis=1)


def _max_level_product(Y: np.ndarray) -> np.ndarray:
    """``max_a a * #{leaves: Y >= a}`` with ``a`` ranging over attained levels."""
    best = np.zeros(len(Y), dtype=np.int64)
    for j in range(4):
        a = Y[:, j]
        cnt = (Y >= a[:, None]).sum(axis=1)
        best = np.maximum(best, a * cnt)
    return best


def _binary_tree() -> ScenarioTree:
    half = Fraction(1, 2)
    return ScenarioTree.from_branching([[half, half], [half, half]])


def _as_process(tree: ScenarioTree, row) -> AdaptedProcess:
    # from_branching ids: 0 root, 1 up, 2 down, 3..6 leaves in the same order as the row
    return AdaptedProcess(tree, {i: Fraction(int(x), 2) for i, x in enumerate(row)})


def _vertex_controls(tree: ScenarioTree) -> list[PredictableControl]:
    return [PredictableControl(tree, {0: h[0], 1: h[1], 2: h[2]}) for h in VERTEX_H]


def burkholder_sweep(subsample: int = 400, seed: int = 0
                     ) -> tuple[ExperimentReport, ExperimentReport, ExperimentReport]:
    """Exhaustive check of the constants 9 and 18 and of the Doob-Meyer bound.

    Integer forms, in half units with four leaves of mass 1/4:
    ``a P[Y >= a] <= 9 E[S_0]`` is ``a_h cnt <= 36 s0_h``; for martingale members
    and ``M = S - S_0``, ``a P <= 18 E|M_T|`` is ``a_h cnt <= 18 sum |m_h|``.
    Doob-Meyer, in quarter units: ``sum A_q^2 <= sum M_q^2 <= 8 a_q z0_q``.
    A random subsample is re-checked with the exact rational checkers.
    """
    start = time.perf_counter()
    S = binary_supermartingales()
    sup9 = ExperimentReport("burkholder-9")
    mart18 = ExperimentReport("burkholder-18")
    dm = ExperimentReport("doob-meyer")
    is_mart = (2 * S[:, 0] == S[:, 1] + S[:, 2]) & (2 * S[:, 1] == S[:, 3] + S[:, 4]) \
        & (2 * S[:, 2] == S[:, 5] + S[:, 6])
    M_abs = np.abs(S[:, 3:7] - S[:, [0]]).sum(axis=1)
    worst9, worst18 = Fraction(0), Fraction(0)
    for h in VERTEX_H:
        lhs = _max_level_product(_leaf_running_max(S, h))
        bad = lhs > 36 * S[:, 0]
        for i in np.flatnonzero(bad)[:20]:
            sup9.fail(None, S=tuple(int(x) for x in S[i]), H=h, lhs=int(lhs[i]))
        sup9.instances += len(S)
        pos = S[:, 0] > 0
        if pos.any():
            r = lhs[pos] / S[pos, 0]
            k = int(np.argmax(r))
            worst9 = max(worst9, Fraction(int(lhs[pos][k]), 4 * int(S[pos, 0][k])))
        lm, mm = lhs[is_mart], M_abs[is_mart]
        bad = lm > 18 * mm
        for i in np.flatnonzero(bad)[:20]:
            mart18.fail(None, S=tuple(int(x) for x in S[is_mart][i]), H=h)
        mart18.instances += int(is_mart.sum())
        pos = mm > 0
        if pos.any():
            r = lm[pos] / mm[pos]
            k = int(np.argmax(r))
            worst18 = max(worst18, Fraction(int(lm[pos][k]), int(mm[pos][k])))
    sup9.worst_ratio, mart18.worst_ratio = worst9, worst18
    sup9.worst_slack = Fraction(9) - worst9
    mart18.worst_slack = Fraction(18) - worst18

    # Doob-Meyer in quarter units: Z_q = 2 S_h
    Zq = 2 * S
    drift1 = (Zq[:, 1] + Zq[:, 2]) // 2 - Zq[:, 0]  # exact: sums of quarter values are even
    drift_u = (Zq[:, 3] + Zq[:, 4]) // 2 - Zq[:, 1]
    drift_d = (Zq[:, 5] + Zq[:, 6]) // 2 - Zq[:, 2]
    A = np.stack([-drift1 - drift_u, -drift1 - drift_u, -drift1 - drift_d, -drift1 - drift_d], axis=1)
    Mq = Zq[:, 3:7] + A
    amax = Zq.max(axis=1)
    ea2, em2 = (A ** 2).sum(axis=1), (Mq ** 2).sum(axis=1)
    bound = 8 * amax * Zq[:, 0]
    dm.instances = len(S)
    for i in np.flatnonzero((ea2 > em2) | (em2 > bound))[:20]:
        dm.fail(None, S=tuple(int(x) for x in S[i]), EA2=int(ea2[i]), EM2=int(em2[i]))
    pos = bound > 0
    k = int(np.argmax(np.where(pos, em2 / np.where(pos, bound, 1), 0)))
    dm.worst_ratio = Fraction(int(em2[k]), int(bound[k])) if bound[k] else Fraction(0)
    dm.worst_slack = Fraction(int((np.minimum(em2 - ea2, bound - em2)).min()), 64)

    # rational cross-check on a subsample
    rng = random.Random(seed)
    tree = _binary_tree()
    Hs = _vertex_controls(tree)
    idx = rng.sample(range(len(S)), min(subsample, len(S)))
    for i in idx:
        proc = _as_process(tree, S[i])
        r9 = check_burkholder_supermartingale(proc, Hs, seed=i)
        rdm = check_doob_meyer_bound(proc, seed=i)
        if not r9.passed or not rdm.passed:
            sup9.notes.append(f"rational re-check disagrees at row {i}")
            sup9.fail(i, check="rational re-check")
        if is_mart[i]:
            M = proc - proc.initial()
            if not check_burkholder_martingale(M, Hs, seed=i).passed:
                mart18.fail(i, check="rational re-check")
    elapsed = time.perf_counter() - start
    for rep in (sup9, mart18, dm):
        rep.data["seconds"] = elapsed
        rep.data["supermartingales"] = len(S)
        rep.data["martingales"] = int(is_mart.sum())
    sup9.notes.append(f"{len(S)} supermartingales, {len(VERTEX_H)} vertex integrands, "
                      f"{len(idx)} rows re-checked in exact arithmetic")
    return sup9, mart18, dm


# -- NUPBR implies P-UT -----------------------------------------------------------

def nupbr_params(seed: int) -> ModelParams:
    rng = random.Random(7919 * seed + 3)
    return ModelParams(depth=rng.randint(1, 2), branching=rng.randint(2, 3), dim=rng.randint(1, 2),
                       constraint_density=rng.choice([0.0, 0.5]), emm_first=rng.random() < 0.5)


def nupbr_model(seed: int, tries: int = 50) -> tuple[MarketModel, int]:
    """First model with NUPBR among seeds derived from ``seed``."""
    for k in range(tries):
        s = 1000 * seed + k
        model = generate_random_model(s, nupbr_params(s))
        if check_nupbr(model).holds:
            return model, s
    raise RuntimeError(f"no NUPBR model found for seed {seed}")


def nupbr_put_instance(seed: int, length: int = 10, grid=DEFAULT_GRID) -> ExperimentReport:
    model, s = nupbr_model(seed)
    seq = random_admissible_sequence(model, random.Random(s), length)
    return experiment_nupbr_put(model, seq, grid, seed=seed)


def nupbr_put_sweep(seeds: Iterable[int], length: int = 10, workers: int = 1) -> ExperimentReport:
    rep = ExperimentReport("nupbr-put")
    inexact = 0
    for r in _run(nupbr_put_instance, seeds, workers):
        rep.merge(r)
        inexact += not r.data.get("deflator_exact", True)
    if inexact:
        rep.notes.append(f"{inexact} deflators used the exact-LP fallback at some node")
    return rep


# -- convergence sequences ----------------------------------------------------

LENGTH = 32


def memin_slominski_sequence(seed: int, length: int = LENGTH) -> tuple[AdaptedProcess, list[AdaptedProcess]]:
    """``X^n = X + (c / n^3) Y`` with ``Y`` silent on the big-jump cells of ``X``.

    ``c`` is chosen so that for small ``n`` some small-jump cell crosses the
    threshold, which makes the early big-jump patterns differ from the limit.
    """
    rng = random.Random(31 * seed + 5)
    tree = random_tree(rng, rng.randint(1, 3), rng.randint(2, 3))
    vals = {tree.root: Fraction(rng.randint(-4, 4), 2)}
    for v in tree.internal:
        for c in tree.children(v):
            vals[c] = vals[v] + Fraction(rng.randint(-6, 6), 2)
    X = AdaptedProcess(tree, vals)
    C0 = jump_threshold(X)
    yv = {tree.root: Fraction(0)}
    gap = None
    for v in tree.internal:
        for c in tree.children(v):
            dx = X.increment(c)[0]
            small = abs(dx) < C0
            dy = Fraction(rng.choice([-1, 1])) if small else Fraction(0)
            yv[c] = yv[v] + dy
            if small:
                g = C0 - abs(dx)
                gap = g if gap is None else min(gap, g)
    Y = AdaptedProcess(tree, yv)
    scale = 2 * gap if gap is not None else Fraction(1)  # n = 1 crosses the threshold
    seq = [X + Y * (scale / n ** 3) for n in range(1, length + 1)]
    return X, seq


def memin_slominski_sweep(seeds: Iterable[int], config: ConvergenceConfig = ConvergenceConfig(),
                          workers: int = 1) -> ExperimentReport:
    rep = ExperimentReport("memin-slominski")
    for s in seeds:
        X, seq = memin_slominski_sequence(s)
        r = experiment_memin_slominski(X, seq, config, seed=s)
        # the perturbation is silent on big-jump cells, so Xcheck must match exactly once stable
        if not r.data["tv_zero_after_stable"]:
            r.fail(s, check="TV(Xcheck^n-Xcheck) nonzero after stabilization")
        rep.merge(r)
    return rep


def emery_sequence(seed: int, length: int = LENGTH) -> tuple[MarketModel, AdaptedProcess, list[AdaptedProcess]]:
    """Unconstrained arbitrage-free model, ``X^n`` = wealth of ``phi + psi / n^3``."""
    rng = random.Random(77 * seed + 11)
    params = ModelParams(depth=rng.randint(1, 3), branching=rng.randint(2, 3), dim=rng.randint(1, 2),
                         emm_first=True)
    model = generate_random_model(10_000 + seed, params)
    phi = random_strategy(model, rng, 1)
    X = stochastic_integral(phi, model.S)
    low = min(X.scalar(v) for v in model.tree.ids)
    if low < -model.floor / 2:
        phi = phi * (model.floor / (-2 * low))
        X = stochastic_integral(phi, model.S)
    psi = random_strategy(model, rng, 2)
    seq = [stochastic_integral(phi + psi * Fraction(1, n ** 3), model.S) for n in range(1, length + 1)]
    return model, X, seq


def dominated_sequence(seed: int, length: int = LENGTH) -> tuple[MarketModel, AdaptedProcess, list[AdaptedProcess]]:
    """Two assets with ``dS2 = dS1 - 1/2``; asset 2 long-only, so holding it is dominated."""
    rng = random.Random(13 * seed + 17)
    tree = random_tree(rng, rng.randint(1, 2), 2)
    S = {tree.root: (Fraction(2), Fraction(2))}
    for v in tree.internal:
        kids = tree.children(v)
        ups = [Fraction(1, 4), Fraction(-1, 4)]
        for c, d1 in zip(kids, ups):
            S[c] = (S[v][0] + d1, S[v][1] + d1 - Fraction(1, 2))
    cones = {v: [(1, 0), (-1, 0), (0, 1)] for v in tree.internal}
    model = MarketModel(AdaptedProcess(tree, S, 2), cones, 1)
    h = Fraction(1, 2)
    phi = PredictableControl(tree, {v: (0, h) for v in tree.internal}, 2)
    X = wealth(model, phi).wealth
    psi = PredictableControl(tree, {v: (Fraction(rng.randint(-2, 2)), 0) for v in tree.internal}, 2)
    seq = [stochastic_integral(phi + psi * Fraction(1, n ** 3), model.S) for n in range(1, length + 1)]
    return model, X, seq


def emery_sweep(seeds: Iterable[int], dominated_seeds: Iterable[int],
                config: ConvergenceConfig = ConvergenceConfig()) -> tuple[ExperimentReport, ExperimentReport]:
    """Maximal limits must converge; dominated limits must report a dominating element."""
    conv = ExperimentReport("emery-convergence")
    for s in seeds:
        model, X, seq = emery_sequence(s)
        conv.merge(experiment_emery_convergence(model, X, seq, config, seed=s))
    dom = ExperimentReport("emery-dominated")
    for s in dominated_seeds:
        model, X, seq = dominated_sequence(s)
        r = experiment_emery_convergence(model, X, seq, config, seed=s)
        me = r.data.get("dominating")
        dom.instances += 1
        if me is not None and me.dominates_strictly(X.terminal()):
            dom.observe(0, None, s, dominating=me.h0)
        else:
            dom.fail(s, check="no dominating element reported")
    return conv, dom


# -- slicing lemma ------------------------------------------------------------------

EPS_GRID = tuple(Fraction(1, k) for k in (2, 3, 4, 5, 6, 8, 10, 12, 16, 24))
ALPHA_GRID = tuple(Fraction(1, k) for k in (6, 8, 12, 24, 48, 100))


def symmetric_walk(T: int, eps: Fraction) -> AdaptedProcess:
    half = Fraction(1, 2)
    tree = ScenarioTree.from_branching([[half, half]] * T)
    vals = {tree.root: Fraction(0)}
    for v in tree.internal:
        up, dn = tree.children(v)
        vals[up], vals[dn] = vals[v] + eps, vals[v] - eps
    return AdaptedProcess(tree, vals)


def move_or_freeze(T: int, eps: Fraction) -> AdaptedProcess:
    """Three-way branching: up or down by ``eps`` with mass 1/4 each, else stay."""
    q = Fraction(1, 4)
    tree = ScenarioTree.from_branching([[q, q, 2 * q]] * T)
    vals = {tree.root: Fraction(0)}
    for v in tree.internal:
        up, dn, st = tree.children(v)
        vals[up], vals[dn], vals[st] = vals[v] + eps, vals[v] - eps, vals[v]
    return AdaptedProcess(tree, vals)


def slicing_sweep(max_T: int = 8, freeze_T: int = 3) -> ExperimentReport:
    rep = ExperimentReport("slicing-lemma")
    cases = [(symmetric_walk, T) for T in range(1, max_T + 1)] + [(move_or_freeze, T) for T in range(1, freeze_T + 1)]
    for builder, T in cases:
        for eps in EPS_GRID:
            N = builder(T, eps)
            for alpha in ALPHA_GRID:
                check_slicing_lemma(N, eps, alpha, seed=T, report=rep)
    vac = rep.data.get("vacuous", 0)
    rep.notes.append(f"{rep.instances} hypothesis-met cases, {vac} with k = floor(alpha/(2 eps)) = 0, "
                     f"{rep.skipped} skipped")
    return rep


SUITES = ("ftap", "burkholder", "nupbr-put", "memin-slominski", "emery", "slicing")


def run_suite(name: str, seeds: range, workers: int = 1) -> list[ExperimentReport]:
    """Run a named suite over ``seeds`` (ignored by the exhaustive suites)."""
    if name == "ftap":
        return list(ftap_sweep(seeds, workers))
    if name == "burkholder":
        return list(burkholder_sweep())
    if name == "nupbr-put":
        return [nupbr_put_sweep(seeds, workers=workers)]
    if name == "memin-slominski":
        return [memin_slominski_sweep(seeds)]
    if name == "emery":
        return list(emery_sweep(seeds, range(seeds.start, seeds.start + 5)))
    if name == "slicing":
        return [slicing_sweep()]
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
