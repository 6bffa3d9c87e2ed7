"""Maximal inequalities: Burkholder (constants 9 and 18), the Doob-Meyer bound,
and the slicing lemma for martingales with small jumps."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from fractions import Fraction

from ..calculus import doob_decomposition, slicing_times, stochastic_integral
from ..tree import AdaptedProcess, PredictableControl, as_fraction
from .report import ExperimentReport

BURKHOLDER_CONSTANT = 9
MARTINGALE_CONSTANT = 18


def _running_max(I: AdaptedProcess) -> dict[int, Fraction]:
    tree = I.tree
    return {w: max(abs(I.scalar(v)) for v in tree.path(w)) for w in tree.leaves}


def _levels(Y: dict[int, Fraction], a_grid) -> list[Fraction]:
    """The grid, or the attained positive levels (where ``a P[Y >= a]`` peaks)."""
    if a_grid is not None:
        return [as_fraction(a) for a in a_grid]
    return sorted({y for y in Y.values() if y > 0})


def _check_h(H: PredictableControl) -> None:
    if any(abs(x) > 1 for v in H.tree.internal for x in H[v]):
        raise ValueError("integrands must satisfy |H| <= 1")


def check_burkholder_supermartingale(S: AdaptedProcess, H_candidates: Iterable[PredictableControl],
                                     a_grid: Sequence | None = None, seed=None,
                                     report: ExperimentReport | None = None) -> ExperimentReport:
    """``a P[|(H.S)|^*_T >= a] <= 9 E[S_0]`` for a nonnegative supermartingale ``S``."""
    rep = report or ExperimentReport("burkholder-supermartingale")
    tree = S.tree
    if any(x < 0 for v in tree.ids for x in S[v]) or not S.is_supermartingale():
        raise ValueError("S must be a nonnegative supermartingale")
    es0 = sum(S.initial())
    for H in H_candidates:
        _check_h(H)
        Y = _running_max(stochastic_integral(H, S))
        for a in _levels(Y, a_grid):
            lhs = a * sum((tree.prob(w) for w in tree.leaves if Y[w] >= a), Fraction(0))
            ratio = lhs / es0 if es0 else Fraction(0)
            rep.instances += 1
            rep.observe(BURKHOLDER_CONSTANT * es0 - lhs, ratio, seed, a=a, lhs=lhs, ES0=es0)
    return rep


def check_burkholder_martingale(M: AdaptedProcess, H_candidates: Iterable[PredictableControl],
                                a_grid: Sequence | None = None, seed=None,
                                report: ExperimentReport | None = None) -> ExperimentReport:
    """``a P[|(H.M)|^*_T >= a] <= 18 E[|M_T|]`` for a martingale ``M``."""
    rep = report or ExperimentReport("burkholder-martingale")
    tree = M.tree
    if not M.is_martingale():
        raise ValueError("M must be a martingale")
    e_abs = sum((tree.prob(w) * abs(M.scalar(w)) for w in tree.leaves), Fraction(0))
    for H in H_candidates:
        _check_h(H)
        Y = _running_max(stochastic_integral(H, M))
        for a in _levels(Y, a_grid):
            lhs = a * sum((tree.prob(w) for w in tree.leaves if Y[w] >= a), Fraction(0))
            ratio = lhs / e_abs if e_abs else Fraction(0)
            rep.instances += 1
            rep.observe(MARTINGALE_CONSTANT * e_abs - lhs, ratio, seed, a=a, lhs=lhs, E_abs_MT=e_abs)
    return rep


def doob_meyer_parts(Z: AdaptedProcess) -> tuple[AdaptedProcess, AdaptedProcess]:
    """``Z = M - A`` with ``M`` a martingale started at ``Z_0`` and ``A`` predictable, ``A_0 = 0``."""
    Mc, B = doob_decomposition(Z)
    return Mc + Z.initial(), -B


def check_doob_meyer_bound(Z: AdaptedProcess, a=None, seed=None,
                           report: ExperimentReport | None = None) -> ExperimentReport:
    """``E[A_T^2] <= E[M_T^2] <= 2 a E[Z_0]`` for a supermartingale ``0 <= Z <= a``.

    ``a`` defaults to ``max Z``, the sharpest admissible bound.
    """
    rep = report or ExperimentReport("doob-meyer-bound")
    tree = Z.tree
    zmax = max(Z.scalar(v) for v in tree.ids)
    a = zmax if a is None else as_fraction(a)
    if any(Z.scalar(v) < 0 for v in tree.ids) or zmax > a or not Z.is_supermartingale():
        raise ValueError("Z must be a supermartingale with 0 <= Z <= a")
    M, A = doob_meyer_parts(Z)
    ea2 = sum((tree.prob(w) * A.scalar(w) ** 2 for w in tree.leaves), Fraction(0))
    em2 = sum((tree.prob(w) * M.scalar(w) ** 2 for w in tree.leaves), Fraction(0))
    bound = 2 * a * Z.scalar(tree.root)
    rep.instances += 1
    rep.observe(em2 - ea2, None, seed, check="E[A^2]<=E[M^2]", EA2=ea2, EM2=em2)
    rep.observe(bound - em2, em2 / bound if bound else None, seed, check="E[M^2]<=2aE[Z0]",
                EM2=em2, bound=bound)
    return rep


def slicing_increments(N: AdaptedProcess, eps) -> list[dict[int, Fraction]]:
    """``f_i = N_{T_i ∧ T} - N_{T_{i-1} ∧ T}`` per leaf, for i = 1, 2, ..."""
    tree = N.tree
    taus = slicing_times(N, eps)
    out = []
    for prev, cur in zip(taus, taus[1:]):
        f = {}
        for w in tree.leaves:
            path = tree.path(w)
            t0 = min(prev.on_leaf(w), tree.horizon)
            t1 = min(cur.on_leaf(w), tree.horizon)
            f[w] = N.scalar(path[t1]) - N.scalar(path[t0])
        out.append(f)
    return out


def check_slicing_lemma(N: AdaptedProcess, eps, alpha, seed=None,
                        report: ExperimentReport | None = None) -> ExperimentReport:
    """If ``P[|N|^*_T >= 1] >= 6 alpha`` then ``P[f_i < -alpha eps] >= alpha`` for ``i <= alpha/(2 eps)``.

    Cases where the hypothesis fails are counted as skipped.  The pathwise
    bounds ``|f_i| <= 2 eps`` and ``|N_{T_i} - N_{T_{i-1}}| <= eps + max|dN|``
    are checked whether or not the hypothesis holds.
    """
    rep = report or ExperimentReport("slicing-lemma")
    eps, alpha = as_fraction(eps), as_fraction(alpha)
    tree = N.tree
    if not 0 < alpha < 1 or eps <= 0:
        raise ValueError("need eps > 0 and 0 < alpha < 1")
    jumps = [abs(N.increment(v)[0]) for v in tree.ids]
    if max(jumps) > eps or not N.is_martingale():
        raise ValueError("N must be a martingale with |dN| <= eps")
    fs = slicing_increments(N, eps)
    for i, f in enumerate(fs, 1):
        worst = max(abs(x) for x in f.values())
        rep.observe(2 * eps - worst, None, seed, check="|f_i|<=2eps", i=i)
        rep.observe(eps + max(jumps) - worst, None, seed, check="overshoot", i=i)
    hit = sum((tree.prob(w) for w in tree.leaves if N.running_max_abs(w) >= 1), Fraction(0))
    if hit < 6 * alpha:
        rep.skipped += 1
        return rep
    k = int(alpha / (2 * eps))  # floor, both positive
    rep.instances += 1
    if k == 0:
        rep.data["vacuous"] = rep.data.get("vacuous", 0) + 1
    for i in range(1, k + 1):
        f = fs[i - 1] if i <= len(fs) else {w: Fraction(0) for w in tree.leaves}
        prob = sum((tree.prob(w) for w in tree.leaves if f[w] < -alpha * eps), Fraction(0))
        rep.observe(prob - alpha, None, seed, check="P[f_i<-alpha eps]>=alpha", i=i, eps=eps, alpha=alpha)
    return rep
