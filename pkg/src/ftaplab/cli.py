"""Command-line interface.

Exit status: 0 when the property holds, 2 when it fails (an arbitrage was
found, a measure does not exist, a harness reported violations), 1 on usage
or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .calculus import big_jump_split, jump_threshold
from .duality import NoDeflator, esm_exists, kreps_yan_construct, numeraire_deflator, verify_deflator
from .generate import ModelParams, generate_random_model
from .market import ArbitrageCertificate, MarketModel, check_na, check_nupbr
from .metrics import emery_distance, put_profile, put_profile_sup, ucp_distance
from .tree import _fmt_vec
from .treefile import ParseError, TreeFile, read_tree_file, render_tree_file

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rational(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from None


def _seed_range(s: str) -> range:
    try:
        a, b = s.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must read a..b, got {s!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError("empty seed range")
    return range(lo, hi + 1)


def _print_certificate(cert: ArbitrageCertificate, label: str) -> None:
    print(f"{label} certificate: {cert.kind}")
    tree = cert.strategy.tree
    for v in tree.internal:
        if any(cert.strategy[v]):
            print(f"  phi({v}) = {_fmt_vec(cert.strategy[v])}")
    print("  terminal " + " ".join(f"{w}:{cert.terminal[w]}" for w in tree.leaves))


def _model(args) -> tuple[TreeFile, MarketModel]:
    tf = read_tree_file(args.file)
    return tf, tf.to_model(args.floor)


def _print_measure(model: MarketModel, q: dict[int, Fraction]) -> None:
    tree = model.tree
    mass = {}
    for v in reversed(tree.ids):
        mass[v] = q[v] if tree.is_leaf(v) else sum(mass[c] for c in tree.children(v))
    for v in tree.ids:
        p = tree.parent(v)
        if p is not None:
            print(f"q({v}|{p}) = {mass[v] / mass[p]}")


def cmd_analyze(args) -> int:
    _, model = _model(args)
    na, nupbr = check_na(model), check_nupbr(model)
    esm = esm_exists(model)
    ky = kreps_yan_construct(model)
    holds = na.holds and nupbr.holds
    print(f"NA: {'holds' if na.holds else 'fails'}")
    print(f"NUPBR: {'holds' if nupbr.holds else 'fails'}")
    print(f"NFLVR: {'holds' if holds else 'fails'}")
    print(f"ESM: {'exists' if esm.exists else 'none'}")
    print(f"Kreps-Yan: {'constructed' if ky.exists else f'fails at atom {ky.failed_atom}'}")
    if len({holds, esm.exists, ky.exists}) != 1:
        print("error: verdicts disagree", file=sys.stderr)
        return EXIT_FAIL
    if esm.exists:
        _print_measure(model, esm.measure.Q_probs)
        return EXIT_OK
    if not na.holds:
        _print_certificate(na.certificate, "NA")
    else:
        _print_certificate(nupbr.certificate, "NUPBR")
    return EXIT_FAIL


def cmd_decompose(args) -> int:
    tf = read_tree_file(args.file)
    X = tf.process(args.proc)
    C = args.threshold if args.threshold is not None else jump_threshold(X)
    dec = big_jump_split(X, C)
    print(f"threshold C = {dec.threshold}")
    if dec.collision:
        print("warning: a jump magnitude equals the threshold")
    print("node B M Xcheck")
    for v in X.tree.ids:
        print(f"{v} {_fmt_vec(dec.B[v])} {_fmt_vec(dec.M[v])} {_fmt_vec(dec.Xcheck[v])}")
    problems = dec.check(X)
    for p in problems:
        print(f"violation: {p}")
    return EXIT_FAIL if problems else EXIT_OK


def cmd_distance(args) -> int:
    tf = read_tree_file(args.file)
    X, Y = tf.process(args.proc), tf.process(args.proc2)
    if args.ucp:
        print(f"ucp = {ucp_distance(X, Y)}")
        return EXIT_OK
    res = emery_distance(X, Y, args.eps)
    print(f"emery lower = {res.value}")
    print(f"emery upper = {res.upper}")
    print(f"method = {res.method}")
    return EXIT_OK if res.converged else EXIT_FAIL


def cmd_put_profile(args) -> int:
    tf = read_tree_file(args.file)
    fam = [tf.process(n) for n in args.procs]
    prof = (put_profile_sup if args.sup else put_profile)(fam, sorted(set(args.grid)))
    print(f"method = {prof.method}{' (lower bound only)' if prof.lower_bound_only else ''}")
    for a in prof.a_grid:
        print(f"{a} {prof(a)}")
    return EXIT_OK


def cmd_certify(args) -> int:
    _, model = _model(args)
    if args.esm:
        res = esm_exists(model)
        if not res.exists:
            _print_certificate(res.certificate, "arbitrage")
            return EXIT_FAIL
        print(f"min q/p = {res.min_ratio}")
        for w in model.tree.leaves:
            print(f"Z({w}) = {res.measure.density[w]}")
        return EXIT_OK
    if args.kreps_yan:
        res = kreps_yan_construct(model)
        if not res.exists:
            print(f"failed atom = {res.failed_atom}")
            _print_certificate(res.certificate, "atom-failure")
            return EXIT_FAIL
        for w in model.tree.leaves:
            print(f"Z({w}) = {res.measure.density[w]}")
        return EXIT_OK
    try:
        defl = numeraire_deflator(model)
    except NoDeflator as exc:
        _print_certificate(exc.certificate, "NUPBR")
        return EXIT_FAIL
    rep = verify_deflator(model, defl)
    for v in model.tree.ids:
        print(f"D({v}) = {defl.D.scalar(v)}")
    print(f"exact numeraire ratios: {'yes' if defl.exact else 'no'}")
    for msg in rep.violations:
        print(f"violation: {msg}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_harness(args) -> int:
    from .harness import run_suite, write_reports

    reports = run_suite(args.suite, args.seeds, args.workers)
    for r in reports:
        print(r.summary())
        for n in r.notes:
            print(f"  note: {n}")
    if args.out:
        txt, tsv = write_reports(reports, args.out, args.suite)
        print(f"wrote {txt} and {tsv}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_gen(args) -> int:
    params = ModelParams(depth=args.depth, branching=args.branch, dim=args.dim, price_range=args.range,
                         constraint_density=args.density, emm_first=args.emm_first)
    model = generate_random_model(args.seed, params)
    text = render_tree_file(TreeFile.from_model(model))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .harness import SUITES

    p = _Parser(prog="ftaplab", description="Exact no-arbitrage analysis on finite scenario trees.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_file(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file")
        return sp

    sp = with_file("analyze", "all arbitrage verdicts with certificates")
    sp.add_argument("--floor", type=_rational, default=Fraction(1), help="admissibility floor (default 1)")
    sp.set_defaults(func=cmd_analyze)

    sp = with_file("decompose", "big-jump split X = B + M + Xcheck")
    sp.add_argument("--proc", required=True)
    sp.add_argument("--threshold", type=_rational)
    sp.set_defaults(func=cmd_decompose)

    sp = with_file("distance", "Emery or ucp distance between two processes")
    sp.add_argument("--proc", required=True)
    sp.add_argument("--proc2", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--emery", action="store_true")
    g.add_argument("--ucp", action="store_true")
    sp.add_argument("--eps", type=_rational, default=Fraction(1, 1000))
    sp.set_defaults(func=cmd_distance)

    sp = with_file("put-profile", "P-UT profile of a family of processes")
    sp.add_argument("--procs", nargs="+", required=True)
    sp.add_argument("--grid", nargs="+", type=_rational, required=True)
    sp.add_argument("--sup", action="store_true", help="running-maximum variant")
    sp.set_defaults(func=cmd_put_profile)

    sp = with_file("certify", "separating measure, Kreps-Yan density or numeraire deflator")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--esm", action="store_true")
    g.add_argument("--kreps-yan", action="store_true")
    g.add_argument("--deflator", action="store_true")
    sp.add_argument("--floor", type=_rational, default=Fraction(1))
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("harness", help="run a property suite")
    sp.add_argument("--suite", required=True, choices=SUITES)
    sp.add_argument("--seeds", type=_seed_range, default=range(0, 20), help="inclusive range a..b")
    sp.add_argument("--out", help="directory for the .report.txt and .report.tsv files")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_harness)

    sp = sub.add_parser("gen", help="write a random model in the tree format")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--branch", type=int, required=True)
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--range", type=int, default=4, help="increments drawn from {-r..r}/2")
    sp.add_argument("--density", type=float, default=0.0, help="probability a node is constrained")
    sp.add_argument("--emm-first", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
