"""P-UT experiments: NUPBR implies P-UT, the characterization through the
big-jump split, and stability of P-UT under integration."""

from __future__ import annotations

from collections.abc import Sequence
from fractions import Fraction

from ..calculus import big_jump_split, integration_by_parts, jump_threshold, stochastic_integral, variation
from ..duality import numeraire_deflator, verify_deflator
from ..market import MarketModel, WealthProcess
from ..metrics import l0_quantile, put_profile, put_profile_sup
from ..tree import AdaptedProcess, TerminalVariable, as_fraction
from .inequalities import BURKHOLDER_CONSTANT
from .report import ExperimentReport

DEFAULT_GRID = tuple(Fraction(2) ** k for k in range(7))  # 1, 2, 4, ..., 64


def experiment_nupbr_put(model: MarketModel, sequence: Sequence[WealthProcess], a_grid=DEFAULT_GRID,
                         seed=None, profiles: bool = True,
                         report: ExperimentReport | None = None) -> ExperimentReport:
    """Deflate ``1 + X^n`` by the numeraire deflator and check the P-UT chain.

    * ``1 + X^n = U_0 Z_0 + U_- . Z^n + Z^n_- . U + [U, Z^n]`` with
      ``U = 1/D`` and ``Z^n = D (1 + X^n)``, exactly at every node;
    * ``sup_H P[|(H . Z^n)|^* >= a] <= 9 E[Z^n_0] / a <= 9 / a``.
    """
    rep = report or ExperimentReport("nupbr-put")
    grid = tuple(as_fraction(a) for a in a_grid)
    defl = numeraire_deflator(model)
    dr = verify_deflator(model, defl)
    if not dr.passed:
        rep.fail(seed, check="deflator", problems="; ".join(dr.violations))
        return rep
    D = defl.D
    U = D.reciprocal()
    tree = model.tree
    Zs, terms = [], ([], [], [])
    for n, X in enumerate(sequence):
        if not X.admissible or X.floor > 1:
            raise ValueError("sequence members must lie in X_1")
        V = X.value
        Z = D * V
        Zs.append(Z)
        a1, a2, a3 = integration_by_parts(U, Z)
        lhs = V
        rhs = a1 + a2 + a3 + U.scalar(tree.root) * Z.scalar(tree.root)
        residual = max(abs(x - y) for x, y in zip(
            (lhs.scalar(v) for v in tree.ids), (rhs.scalar(v) for v in tree.ids)))
        rep.instances += 1
        if residual != 0:
            rep.fail(seed, check="integration-by-parts", n=n, residual=residual)
        for t, x in zip(terms, (a1, a2, a3)):
            t.append(x)
        if any(Z.scalar(v) < 0 for v in tree.ids) or not Z.is_supermartingale():
            rep.fail(seed, check="deflated wealth is a nonnegative supermartingale", n=n)
    if not Zs:
        return rep
    ez0 = max(Z.scalar(tree.root) for Z in Zs)
    prof = put_profile_sup(Zs, grid)
    for a in grid:
        val = prof(a)
        bound = BURKHOLDER_CONSTANT * ez0 / a
        rep.observe(min(bound, Fraction(9) / a) - val, a * val, seed, check="deflated Burkholder", a=a,
                    profile=val)
    rep.data["deflated_profile"] = prof
    if profiles:
        rep.data["profile_X"] = put_profile([X.wealth for X in sequence], grid)
        for name, fam in zip(("profile_U-.Z", "profile_Z-.U", "profile_[U,Z]"), terms):
            rep.data[name] = put_profile(fam, grid)
    rep.data["deflator_exact"] = defl.exact
    return rep


def _stopped_qv_mean(M: AdaptedProcess, eta: Fraction) -> tuple[Fraction, Fraction]:
    """``(P[[M,M]_T >= eta], E[[M,M]_{tau ∧ T}])`` with ``tau`` the hitting time of ``eta``."""
    tree = M.tree
    Q = variation(M, "quadratic")
    tail = Fraction(0)
    mean = Fraction(0)
    for w in tree.leaves:
        path = tree.path(w)
        stop = next((v for v in path if Q.scalar(v) >= eta), path[-1])
        mean += tree.prob(w) * Q.scalar(stop)
        if Q.scalar(w) >= eta:
            tail += tree.prob(w)
    return tail, mean


def _martingale_bound(Ms: Sequence[AdaptedProcess], b: Fraction) -> Fraction:
    """Upper bound on ``sup_n sup_H P[|(H . M^n)_T| >= b]`` by localized Chebyshev."""
    best = Fraction(0)
    for M in Ms:
        tree = M.tree
        Q = variation(M, "quadratic")
        cands = sorted({Q.scalar(v) for v in tree.ids if Q.scalar(v) > 0}) + [None]
        bound_n = Fraction(1)
        for eta in cands:
            if eta is None:
                tail, mean = Fraction(0), sum((tree.prob(w) * Q.scalar(w) for w in tree.leaves), Fraction(0))
            else:
                tail, mean = _stopped_qv_mean(M, eta)
            bound_n = min(bound_n, tail + mean / (b * b))
        best = max(best, bound_n)
    return best


def _tail(family, a, strict=False) -> Fraction:
    out = Fraction(0)
    for xi in family:
        tree = xi.tree
        out = max(out, sum((tree.prob(w) for w in tree.leaves if (xi[w] > a if strict else xi[w] >= a)),
                           Fraction(0)))
    return out


def check_put_characterization(family: Sequence[AdaptedProcess], a_grid=DEFAULT_GRID,
                               eta_grid=(Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)), seed=None,
                               report: ExperimentReport | None = None) -> ExperimentReport:
    """Compare the P-UT profile with L0 bounds on ``TV(Xcheck)``, ``[M, M]``, ``TV(B)``.

    Checked links, all valid for every scalar family:

    * ``profile(a) <= P[TV(Xcheck) >= a/3] + P[TV(B) >= a/3] + mbound(a/3)``;
    * ``P[|X - X_0|^*_T >= a] <= profile_sup(a)``;
    * ``P[[X, X]_T >= a^2 + 2ab] <= profile_sup(a) + profile(b)``.
    """
    rep = report or ExperimentReport("put-characterization")
    family = list(family)
    if any(X.dim != 1 for X in family):
        raise ValueError("characterization check expects scalar processes")
    grid = tuple(as_fraction(a) for a in a_grid)
    C = jump_threshold(family)
    splits = [big_jump_split(X, C) for X in family]
    tv_check = [variation(s.Xcheck).terminal() for s in splits]
    tv_B = [variation(s.B).terminal() for s in splits]
    qv_M = [variation(s.M, "quadratic").terminal() for s in splits]
    prof = put_profile(family, grid)
    prof_sup = put_profile_sup(family, grid)
    rep.data.update(threshold=C, profile=prof, profile_sup=prof_sup)
    rep.data["quantiles"] = {eta: (l0_quantile(tv_check, eta), l0_quantile(qv_M, eta), l0_quantile(tv_B, eta))
                             for eta in eta_grid}
    Ms = [s.M for s in splits]
    run = []
    for X in family:
        tree = X.tree
        x0 = X.scalar(tree.root)
        run.append(TerminalVariable(tree, {w: max(abs(X.scalar(v) - x0) for v in tree.path(w))
                                           for w in tree.leaves}))
    qv = [variation(X, "quadratic").terminal() for X in family]
    for a in grid:
        rep.instances += 1
        b = a / 3
        upper = min(Fraction(1), _tail(tv_check, b) + _tail(tv_B, b) + _martingale_bound(Ms, b))
        rep.observe(upper - prof(a), None, seed, check="profile<=union bound", a=a)
        rep.observe(prof_sup(a) - _tail(run, a), None, seed, check="|X|* tail<=profile_sup", a=a)
        rep.observe(min(Fraction(1), prof_sup(a) + prof(a)) - _tail(qv, 3 * a * a), None, seed,
                    check="[X,X] tail<=profile_sup+profile", a=a)
    return rep


def check_put_integral_stability(S_family: Sequence[AdaptedProcess], H_family: Sequence[AdaptedProcess],
                                 C_grid=(Fraction(1), Fraction(2), Fraction(4)),
                                 k_grid=(Fraction(1), Fraction(2), Fraction(4)), seed=None,
                                 report: ExperimentReport | None = None) -> ExperimentReport:
    """``profile(H_- . S)(C k) <= profile_S(C) + sup_n P[|H^n|^*_T >= k]``, per member and jointly."""
    rep = report or ExperimentReport("put-integral-stability")
    if len(S_family) != len(H_family):
        raise ValueError("S and H families must have equal length")
    C_grid = tuple(as_fraction(c) for c in C_grid)
    k_grid = tuple(as_fraction(k) for k in k_grid)
    levels = tuple(sorted({c * k for c in C_grid for k in k_grid}))
    integrals = [stochastic_integral(H.lagged(), S) for S, H in zip(S_family, H_family)]
    hstar = []
    for H in H_family:
        tree = H.tree
        hstar.append(TerminalVariable(tree, {w: H.running_max_abs(w) for w in tree.leaves}))
    members = [([S], [I], [h]) for S, I, h in zip(S_family, integrals, hstar)]
    members.append((list(S_family), integrals, hstar))
    for idx, (Ss, Is, hs) in enumerate(members):
        pS = put_profile(Ss, C_grid)
        pI = put_profile(Is, levels)
        for c in C_grid:
            for k in k_grid:
                rep.instances += 1
                rhs = min(Fraction(1), pS(c) + _tail(hs, k))
                rep.observe(rhs - pI(c * k), None, seed, member="family" if idx == len(members) - 1 else idx,
                            C=c, k=k)
        if idx == len(members) - 1:
            rep.data["profile_integral"] = pI
            rep.data["profile_S"] = pS
    return rep
