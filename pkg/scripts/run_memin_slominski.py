"""Big-jump parts along constructed ucp-convergent sequences.

Writes ``memin-slominski.report.txt`` and ``memin-slominski.report.tsv`` to the output directory.
"""

import argparse
import sys
import time

from ftaplab.harness import run_suite, write_reports


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0..19", help="inclusive range a..b")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    lo, hi = map(int, args.seeds.split(".."))
    start = time.perf_counter()
    reports = run_suite("memin-slominski", range(lo, hi + 1), args.workers)
    for r in reports:
        print(r.summary())
        for n in r.notes:
            print("  " + n)
    txt, tsv = write_reports(reports, args.out, "memin-slominski")
    print(f"{time.perf_counter() - start:.1f}s; wrote {txt} and {tsv}")
    return 0 if all(r.passed for r in reports) else 2


if __name__ == "__main__":
    sys.exit(main())
