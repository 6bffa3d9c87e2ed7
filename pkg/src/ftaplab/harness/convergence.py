"""Finite-sequence trend checks for the convergence results: the big-jump
parts of a ucp-convergent P-UT sequence, and Emery convergence towards a
maximal limit."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

from ..calculus import big_jump_split, jump_threshold, variation
from ..market import MarketModel, maximal_element
from ..metrics import emery_distance, put_profile, ucp_distance
from ..tree import AdaptedProcess
from .report import ExperimentReport


@dataclass(frozen=True)
class ConvergenceConfig:
    tol: Fraction = Fraction(1, 1000)  # final upper bounds must not exceed this
    eps: Fraction = Fraction(1, 1000)  # Emery branch-and-bound gap
    max_boxes: int = 400  # early terms only need a certified, not tight, upper bound
    ucp_threshold: Fraction = Fraction(1, 100)  # precondition on the last ucp distance
    profile_grid: tuple[Fraction, ...] = (Fraction(1), Fraction(4), Fraction(16))


def _tv_distance(X: AdaptedProcess, Y: AdaptedProcess) -> Fraction:
    """``max_omega TV(X - Y)_T``."""
    V = variation(X - Y)
    return max(sum(V[w]) for w in X.tree.leaves)


def _pattern(X: AdaptedProcess, C: Fraction) -> frozenset[tuple[int, int]]:
    """``(node, component)`` pairs whose incoming jump exceeds ``C`` in magnitude."""
    tree = X.tree
    return frozenset((v, i) for v in tree.ids if v != tree.root
                     for i, a in enumerate(X.increment(v)) if abs(a) > C)


def _check_ucp(seq, X, cfg: ConvergenceConfig) -> list[Fraction]:
    d = [ucp_distance(Xn, X) for Xn in seq]
    if not d or d[-1] > cfg.ucp_threshold:
        raise ValueError("sequence does not approach its limit in ucp")
    return d


def experiment_memin_slominski(X: AdaptedProcess, sequence: Sequence[AdaptedProcess],
                               config: ConvergenceConfig = ConvergenceConfig(), seed=None,
                               report: ExperimentReport | None = None) -> ExperimentReport:
    """Big-jump parts of ``X^n`` against those of ``X`` under a common threshold.

    Per ``n``: the Emery upper bound on ``M^n - M``, the pathwise maximal total
    variation of ``Xcheck^n - Xcheck`` and ``ucp(B^n, B)``; the last value of
    each must be at most ``tol``.  The stabilization index is the first ``n``
    from which every member jumps above the threshold on exactly the cells
    where the limit does; ``data["tv_zero_after_stable"]`` records whether the
    ``Xcheck`` distance vanishes identically from there on.
    """
    rep = report or ExperimentReport("memin-slominski")
    seq = list(sequence)
    ucp = _check_ucp(seq, X, config)
    C = jump_threshold([X] + seq)
    ref = big_jump_split(X, C)
    emery, tv, ucpB, same = [], [], [], []
    for Xn in seq:
        part = big_jump_split(Xn, C)
        res = emery_distance(part.M, ref.M, config.eps, config.max_boxes)
        emery.append(res.upper)
        tv.append(_tv_distance(part.Xcheck, ref.Xcheck))
        ucpB.append(ucp_distance(part.B, ref.B))
        same.append(_pattern(Xn, C) == _pattern(X, C))
    stable = next((i for i in range(len(seq)) if all(same[i:])), None)
    rep.data.update(threshold=C, ucp=ucp, emery_M=emery, tv_Xcheck=tv, ucp_B=ucpB, stabilization_index=stable,
                    tv_zero_after_stable=stable is not None and all(t == 0 for t in tv[stable:]))
    rep.instances += 1
    rep.observe(config.tol - emery[-1], None, seed, check="emery(M^n,M) final", value=emery[-1])
    rep.observe(config.tol - tv[-1], None, seed, check="TV(Xcheck^n-Xcheck) final", value=tv[-1])
    rep.observe(config.tol - ucpB[-1], None, seed, check="ucp(B^n,B) final", value=ucpB[-1])
    if stable is None:
        rep.fail(seed, check="big-jump pattern never stabilizes")
    # P-UT sanity: profiles stay valid and bounded for the family with its limit
    prof = put_profile([X] + seq, config.profile_grid)
    rep.data["profile"] = prof
    if not prof.is_valid():
        rep.fail(seed, check="P-UT profile monotone in [0, 1]")
    return rep


def experiment_emery_convergence(model: MarketModel, X: AdaptedProcess, sequence: Sequence[AdaptedProcess],
                                 config: ConvergenceConfig = ConvergenceConfig(), seed=None,
                                 report: ExperimentReport | None = None) -> ExperimentReport:
    """Emery distance of ``X^n`` to a limit whose terminal value is maximal.

    When the limit is not maximal the report fails with the dominating element
    stored in ``data["dominating"]``; otherwise the last Emery upper bound must
    be at most ``tol``.  Residuals are attributed to the three big-jump parts.
    """
    rep = report or ExperimentReport("emery-convergence")
    seq = list(sequence)
    ucp = _check_ucp(seq, X, config)
    rep.instances += 1
    me = maximal_element(model, X.terminal())
    if not me.verified:
        rep.fail(seed, check="maximality certificate missing")
        return rep
    if me.dominates_strictly(X.terminal()):
        rep.data["dominating"] = me
        rep.fail(seed, check="limit not maximal", dominating=_fmt_terminal(me.h0))
        return rep
    dist = [emery_distance(Xn, X, config.eps, config.max_boxes).upper for Xn in seq]
    C = jump_threshold([X] + seq)
    ref = big_jump_split(X, C)
    last = big_jump_split(seq[-1], C)
    rep.data.update(ucp=ucp, emery=dist, threshold=C, attribution={
        "B": ucp_distance(last.B, ref.B),
        "M": emery_distance(last.M, ref.M, config.eps, config.max_boxes).upper,
        "Xcheck": _tv_distance(last.Xcheck, ref.Xcheck),
    })
    rep.observe(config.tol - dist[-1], None, seed, check="emery(X^n,X) final", value=dist[-1])
    return rep


def _fmt_terminal(xi) -> str:
    return "{" + ", ".join(f"{w}:{xi[w]}" for w in xi.tree.leaves) + "}"
