"""Separating measures, the Kreps-Yan construction and supermartingale deflators.

Generators of ``K_0`` are the per-node terminal variables
``g(omega) = 1{omega below v} <r, Delta S>`` for cone generators ``r`` at
``v`` (see :meth:`MarketModel.terminal_generators`).  A free column (a
generator pair ``r, -r``) contributes an equality, a signed one an
inequality.  When a measure fails to exist the LP dual multipliers are
turned into an arbitrage strategy, so every negative answer carries a
checkable witness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lp import LinearProgram, LPStatus, solve_lp, solve_lp_many
from .market import ArbitrageCertificate, MarketModel, check_nupbr
from .calculus import stochastic_integral
from .tree import AdaptedProcess, PredictableControl, TerminalVariable

__all__ = [
    "SeparatingMeasure", "ESMResult", "KrepsYanResult", "Deflator", "DeflatorReport",
    "NoDeflator", "esm_exists", "kreps_yan_construct", "numeraire_deflator", "verify_deflator",
    "check_separating",
]


@dataclass(frozen=True)
class SeparatingMeasure:
    density: TerminalVariable
    Q_probs: dict[int, Fraction]

    def expectation(self, xi: TerminalVariable) -> Fraction:
        return sum((self.Q_probs[w] * xi[w] for w in xi.tree.leaves), Fraction(0))


def check_separating(model: MarketModel, Z: TerminalVariable) -> list[str]:
    """Exact check of the separating-measure conditions for a density ``Z``."""
    tree = model.tree
    problems = []
    if any(Z[w] <= 0 for w in tree.leaves):
        problems.append("density not strictly positive")
    if Z.expectation() != 1:
        problems.append(f"E[Z] = {Z.expectation()} != 1")
    for col, g in model.terminal_generators():
        for r in ((col.ray,) + ((tuple(-a for a in col.ray),) if col.free else ())):
            s = sum((tree.prob(w) * Z[w] * g.get(w, 0) * (1 if r == col.ray else -1)
                     for w in g), Fraction(0))
            if s > 0:
                problems.append(f"E[Z g] = {s} > 0 for generator {r} at node {col.node}")
    return problems


def _arbitrage_from_duals(model: MarketModel, y: list[Fraction]) -> ArbitrageCertificate:
    """Strategy ``sum_k y_k r_k`` built from generator-row multipliers, scaled to the floor."""
    phi = model.strategy_from_columns(y)
    W = stochastic_integral(phi, model.S)
    low = min(W.scalar(v) for v in model.tree.ids)
    kind = "NUPBR-violation" if low >= 0 else "NA-violation"
    if low < 0 and model.floor > 0 and low < -model.floor:
        s = model.floor / -low
        phi = phi * s
        W = W * s
    cert = ArbitrageCertificate(kind, phi, W.terminal(), W)
    if cert.verify(model):
        return cert
    # zero floor with a dip below zero: use a nonnegative-wealth witness instead
    fallback = check_nupbr(model).certificate
    if fallback is None or not fallback.verify(model):
        raise RuntimeError("dual arbitrage certificate failed verification")
    return fallback


def _generator_rows(model: MarketModel, scale_by_p: bool, offset: int = 0):
    """Rows ``sum_omega (p_omega) x_omega g_k(omega)`` (<= 0 or = 0) over leaf variables."""
    tree = model.tree
    index = {w: i for i, w in enumerate(tree.leaves)}
    ub, eq = [], []
    for k, (col, g) in enumerate(model.terminal_generators()):
        row = {offset + index[w]: (tree.prob(w) * a if scale_by_p else a) for w, a in g.items()}
        (eq if col.free else ub).append((k, row))
    return ub, eq


@dataclass
class ESMResult:
    exists: bool
    measure: SeparatingMeasure | None = None
    min_ratio: Fraction | None = None  # max over measures of min q/p
    certificate: ArbitrageCertificate | None = None


def esm_exists(model: MarketModel) -> ESMResult:
    """Leaf weights ``q`` maximizing ``min q/p`` among separating measures."""
    tree = model.tree
    leaves = tree.leaves
    m = len(leaves)
    ncols = len(model.all_columns)
    # variables: q_0..q_{m-1}, t (free)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, w in enumerate(leaves):
        A_ub.append({m: tree.prob(w), i: Fraction(-1)})
        b_ub.append(0)
    ub, eq = _generator_rows(model, False)
    for _, row in ub:
        A_ub.append(row)
        b_ub.append(0)
    A_eq.append({i: 1 for i in range(m)})
    b_eq.append(1)
    for _, row in eq:
        A_eq.append(row)
        b_eq.append(0)
    c = [0] * m + [1]
    res = solve_lp(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, free=frozenset({m})))
    if not res.verify():
        raise RuntimeError("separating-measure LP certificate failed verification")
    if res.status is LPStatus.OPTIMAL and res.objective > 0:
        q = dict(zip(leaves, res.x[:m]))
        Z = TerminalVariable(tree, {w: q[w] / tree.prob(w) for w in leaves})
        return ESMResult(True, SeparatingMeasure(Z, q), res.objective)
    # multipliers of the generator rows give an arbitrage
    y = [Fraction(0)] * ncols
    du, de = res.dual_ub, res.dual_eq
    for j, (k, _) in enumerate(ub):
        y[k] = du[m + j]
    for j, (k, _) in enumerate(eq):
        y[k] = de[1 + j]
    cert = _arbitrage_from_duals(model, y)
    return ESMResult(False, None, res.objective if res.optimal else None, cert)


@dataclass
class KrepsYanResult:
    exists: bool
    measure: SeparatingMeasure | None = None
    atom_optima: dict[int, Fraction] = field(default_factory=dict)
    failed_atom: int | None = None
    certificate: ArbitrageCertificate | None = None  # terminal positive on the failed atom


def kreps_yan_construct(model: MarketModel) -> KrepsYanResult:
    """Atom-by-atom separating densities combined with weights ``2^-i``."""
    tree = model.tree
    leaves = tree.leaves
    m = len(leaves)
    ncols = len(model.all_columns)
    ub, eq = _generator_rows(model, True)
    A_ub = [row for _, row in ub]
    A_eq = [{i: tree.prob(w) for i, w in enumerate(leaves)}] + [row for _, row in eq]
    b_eq = [1] + [0] * len(eq)
    objs = []
    for i in range(m):
        c = [0] * m
        c[i] = 1
        objs.append(c)
    lp = LinearProgram(objs[0], A_ub, [0] * len(A_ub), A_eq, b_eq)
    results = solve_lp_many(lp, objs)
    optima = {}

    def failure(i, res):
        y = [Fraction(0)] * ncols
        for j, (k, _) in enumerate(ub):
            y[k] = res.dual_ub[j]
        for j, (k, _) in enumerate(eq):
            y[k] = res.dual_eq[1 + j]
        cert = _arbitrage_from_duals(model, y)
        if cert.terminal[leaves[i]] <= 0 and model.floor > 0:
            raise RuntimeError("atom-failure certificate is not positive on its atom")
        return KrepsYanResult(False, None, optima, leaves[i], cert)

    zs = []
    for i, res in enumerate(results):
        if not res.verify():
            raise RuntimeError("Kreps-Yan atom LP failed verification")
        if res.status is LPStatus.INFEASIBLE:
            return failure(i, res)
        optima[leaves[i]] = res.objective
        if res.objective <= 0:
            return failure(i, res)
        zs.append(res.x)
    gam = [Fraction(1, 2 ** (i + 1)) for i in range(m)]
    total = sum(gam)
    Z = {w: sum((g * z[j] for g, z in zip(gam, zs)), Fraction(0)) / total for j, w in enumerate(leaves)}
    density = TerminalVariable(tree, Z)
    q = {w: tree.prob(w) * Z[w] for w in leaves}
    return KrepsYanResult(True, SeparatingMeasure(density, q), optima)


# -- numéraire deflator ---------------------------------------------------

class NoDeflator(ValueError):
    def __init__(self, certificate: ArbitrageCertificate):
        super().__init__("NUPBR fails; log utility is unbounded along the certificate strategy")
        self.certificate = certificate


@dataclass(frozen=True)
class Deflator:
    D: AdaptedProcess
    witness: PredictableControl  # phi* (number of units held), wealth V* = 1 + phi*.S
    V: AdaptedProcess
    fractions: dict[int, tuple[Fraction, ...]]  # pi at each node: phi*_v = V*_v pi_v
    exact_nodes: frozenset[int]  # nodes where D ratio equals 1/(1 + pi.dS) exactly

    @property
    def exact(self) -> bool:
        return len(self.exact_nodes) == len(self.fractions)


def _node_data(model: MarketModel, v: int):
    tree = model.tree
    kids = tree.children(v)
    p = [tree.cond_prob(c) for c in kids]
    dS = [model.S.increment(c) for c in kids]
    return kids, p, dS


def _newton_log(p: np.ndarray, R: np.ndarray, iters: int = 200) -> np.ndarray | None:
    """Maximize sum p log(1 + R lam) over lam in R^k; None if it looks unbounded."""
    k = R.shape[1]
    lam = np.zeros(k)
    for _ in range(iters):
        u = 1.0 + R @ lam
        g = R.T @ (p / u)
        Hs = -(R.T * (p / u ** 2)) @ R
        step = np.linalg.lstsq(-Hs, g, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return None
        # backtracking inside the domain
        t = 1.0
        f0 = float(p @ np.log(u))
        while True:
            nu = 1.0 + R @ (lam + t * step)
            if np.all(nu > 0) and float(p @ np.log(nu)) >= f0 + 1e-4 * t * float(g @ step) - 1e-15:
                break
            t *= 0.5
            if t < 1e-14:
                break
        lam = lam + t * step
        if np.linalg.norm(lam) > 1e8:
            return None
        if float(g @ step) < 1e-26:
            break
    return lam


def _certify_fraction(model, v, pi, p, dS) -> tuple[Fraction, ...] | None:
    """Return the rho ratios if ``pi`` is exactly log-optimal at ``v``."""
    if not model.in_cone(v, pi):
        return None
    growth = [1 + sum((a * b for a, b in zip(pi, d)), Fraction(0)) for d in dS]
    if any(g <= 0 for g in growth):
        return None
    rho = [1 / g for g in growth]
    if sum((a * b for a, b in zip(p, rho)), Fraction(0)) > 1:
        return None
    for r in model.generators(v):
        if sum((pc * rc * sum((a * b for a, b in zip(r, d)), Fraction(0))
                for pc, rc, d in zip(p, rho, dS)), Fraction(0)) > 0:
            return None
    return tuple(rho)


def _float_optimum(model, v, p, dS) -> np.ndarray:
    """Float log-optimal fraction at node ``v`` over the node cone."""
    d = model.dim
    pf = np.array([float(x) for x in p])
    Sf = np.array([[float(x) for x in row] for row in dS])
    if not model.is_constrained(v):
        lam = _newton_log(pf, Sf)
        return np.zeros(d) if lam is None else lam
    gens = model.generators(v)
    if not gens:
        return np.zeros(d)
    G = np.array([[float(x) for x in r] for r in gens]).T  # d x m
    best, best_val = np.zeros(d), 0.0
    m = G.shape[1]
    # optimum lies in the relative interior of a face spanned by independent generators
    for mask in range(1, 2 ** m):
        J = [j for j in range(m) if mask >> j & 1]
        if len(J) > d or np.linalg.matrix_rank(G[:, J]) < len(J):
            continue
        R = Sf @ G[:, J]
        lam = _newton_log(pf, R)
        if lam is None or np.any(lam < -1e-12):
            continue
        lam = np.maximum(lam, 0)
        u = 1.0 + R @ lam
        if np.any(u <= 0):
            continue
        val = float(pf @ np.log(u))
        if val > best_val + 1e-15:
            best, best_val = G[:, J] @ lam, val
    return best


def _rationalize(x: float, N: int) -> Fraction:
    return Fraction(x).limit_denominator(N)


def _project_ratios(model, v, p, dS, rho_f: np.ndarray) -> tuple[Fraction, ...]:
    """Exact deflator ratios nearest (in L1) to a float guess."""
    k = len(p)
    gens = model.generators(v)
    target = [_rationalize(float(x), 10 ** 9) for x in rho_f]
    for lower_frac in (Fraction(1, 2), Fraction(1, 100)):
        lo = [t * lower_frac for t in target]
        # variables: rho_c (k), e_c (k) with e >= |rho - target|
        A_ub, b_ub = [], []
        for c in range(k):
            A_ub.append({c: -1})
            b_ub.append(-lo[c])
            A_ub.append({c: 1, k + c: -1})
            b_ub.append(target[c])
            A_ub.append({c: -1, k + c: -1})
            b_ub.append(-target[c])
        A_ub.append({c: p[c] for c in range(k)})
        b_ub.append(1)
        for r in gens:
            row = {c: p[c] * sum((a * b for a, b in zip(r, dS[c])), Fraction(0)) for c in range(k)}
            A_ub.append({c: a for c, a in row.items() if a})
            b_ub.append(0)
        res = solve_lp(LinearProgram([0] * k + [-1] * k, A_ub, b_ub))
        if res.optimal:
            return tuple(res.x[:k])
    raise RuntimeError(f"no deflator ratios at node {v}")


def numeraire_deflator(model: MarketModel) -> Deflator:
    """``D = 1 / V*`` for the log-optimal wealth ``V*``, certified exactly per node.

    At nodes where the rationalized Newton optimum passes the exact
    first-order conditions the ratio ``D_c / D_v`` is ``1 / (1 + pi.dS)``.
    Otherwise the ratios are the exact deflator point closest to the float
    optimum, and the node is left out of ``exact_nodes``.
    """
    nupbr = check_nupbr(model)
    if not nupbr.holds:
        raise NoDeflator(nupbr.certificate)
    tree = model.tree
    d = model.dim
    D = {tree.root: Fraction(1)}
    V = {tree.root: Fraction(1)}
    fracs, exact, phi = {}, set(), {}
    for v in tree.internal:
        kids, p, dS = _node_data(model, v)
        pf = _float_optimum(model, v, p, dS)
        rho = None
        pi = (Fraction(0),) * d
        if not np.any(pf):
            rho = _certify_fraction(model, v, pi, p, dS)
        if rho is None:
            for N in (10, 100, 1000, 10 ** 4, 10 ** 6, 10 ** 9):
                cand = tuple(_rationalize(float(x), N) for x in pf)
                rho = _certify_fraction(model, v, cand, p, dS)
                if rho is not None:
                    pi = cand
                    break
        if rho is not None:
            exact.add(v)
        else:
            pi = tuple(_rationalize(float(x), 10 ** 9) for x in pf)
            growth = np.array([1.0 + float(np.dot(pf, [float(a) for a in row])) for row in dS])
            rho = _project_ratios(model, v, p, dS, 1.0 / growth)
            if not model.in_cone(v, pi):
                pi = (Fraction(0),) * d
        fracs[v] = pi
        phi[v] = tuple(V[v] * a for a in pi)
        for c, r, inc in zip(kids, rho, dS):
            D[c] = D[v] * r
            V[c] = V[v] * (1 + sum((a * b for a, b in zip(pi, inc)), Fraction(0)))
    return Deflator(AdaptedProcess(tree, D), PredictableControl(tree, phi, d),
                    AdaptedProcess(tree, V), fracs, frozenset(exact))


@dataclass
class DeflatorReport:
    passed: bool
    violations: list[str]
    slacks: dict[tuple[int, str], Fraction]  # (node, condition) -> slack (>= 0 when satisfied)


def verify_deflator(model: MarketModel, deflator: Deflator | AdaptedProcess) -> DeflatorReport:
    """Exact check of ``D > 0``, ``D_0 <= 1`` and the nodewise supermartingale conditions."""
    D = deflator.D if isinstance(deflator, Deflator) else deflator
    tree = model.tree
    violations, slacks = [], {}
    if any(D.scalar(v) <= 0 for v in tree.ids):
        violations.append("D not strictly positive")
    d0 = D.scalar(tree.root)
    slacks[(tree.root, "D0<=1")] = 1 - d0
    if d0 > 1:
        violations.append(f"D_0 = {d0} > 1")
    for v in tree.internal:
        kids = tree.children(v)
        ed = sum((tree.cond_prob(c) * D.scalar(c) for c in kids), Fraction(0))
        slacks[(v, "drift")] = D.scalar(v) - ed
        if ed > D.scalar(v):
            violations.append(f"E[D_t | node {v}] = {ed} > D = {D.scalar(v)}")
        for r in model.generators(v):
            s = sum((tree.cond_prob(c) * D.scalar(c)
                     * sum((a * b for a, b in zip(r, model.S.increment(c))), Fraction(0))
                     for c in kids), Fraction(0))
            key = (v, "gen " + " ".join(str(a) for a in r))
            slacks[key] = -s
            if s > 0:
                violations.append(f"E[D <r, dS> | node {v}] = {s} > 0 for r = {r}")
    return DeflatorReport(not violations, violations, slacks)
