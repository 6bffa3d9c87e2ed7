"""Experiment reports with line-oriented text and TSV renderings."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path


@dataclass
class Violation:
    seed: int | None
    quantities: dict[str, object]
    slack: Fraction

    def line(self) -> str:
        q = " ".join(f"{k}={_fmt(v)}" for k, v in self.quantities.items())
        return f"seed={self.seed if self.seed is not None else '-'} slack={_fmt(self.slack)} {q}".rstrip()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentReport:
    """Outcome of one property suite; ``passed`` iff no violations."""

    name: str
    instances: int = 0
    violations: list[Violation] = field(default_factory=list)
    worst_ratio: Fraction | None = None
    worst_slack: Fraction | None = None
    skipped: int = 0
    notes: list[str] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    per_seed: dict[int, tuple[bool, Fraction | None]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def observe(self, slack, ratio=None, seed=None, **quantities) -> bool:
        """Record one checked inequality ``slack >= 0``; returns whether it held."""
        slack = Fraction(slack)
        if self.worst_slack is None or slack < self.worst_slack:
            self.worst_slack = slack
        if ratio is not None:
            ratio = Fraction(ratio)
            if self.worst_ratio is None or ratio > self.worst_ratio:
                self.worst_ratio = ratio
        if seed is not None:
            ok, worst = self.per_seed.get(seed, (True, None))
            self.per_seed[seed] = (ok and slack >= 0, slack if worst is None else min(worst, slack))
        if slack < 0:
            self.violations.append(Violation(seed, dict(quantities), slack))
            return False
        return True

    def fail(self, seed=None, **quantities) -> None:
        """Record a violation that has no numeric slack."""
        self.violations.append(Violation(seed, dict(quantities), Fraction(-1)))
        if seed is not None:
            _, worst = self.per_seed.get(seed, (True, None))
            self.per_seed[seed] = (False, worst)

    def merge(self, other: ExperimentReport) -> ExperimentReport:
        self.instances += other.instances
        self.skipped += other.skipped
        self.violations += other.violations
        self.notes += other.notes
        for s, (ok, w) in other.per_seed.items():
            ok0, w0 = self.per_seed.get(s, (True, None))
            ws = [x for x in (w0, w) if x is not None]
            self.per_seed[s] = (ok0 and ok, min(ws) if ws else None)
        if other.worst_slack is not None and (self.worst_slack is None or other.worst_slack < self.worst_slack):
            self.worst_slack = other.worst_slack
        if other.worst_ratio is not None and (self.worst_ratio is None or other.worst_ratio > self.worst_ratio):
            self.worst_ratio = other.worst_ratio
        return self

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{self.name}: {status}", f"instances={self.instances}"]
        if self.skipped:
            parts.append(f"skipped={self.skipped}")
        parts.append(f"violations={len(self.violations)}")
        if self.worst_ratio is not None:
            parts.append(f"worst_ratio={self.worst_ratio} (~{float(self.worst_ratio):.6g})")
        if self.worst_slack is not None:
            parts.append(f"worst_slack={self.worst_slack}")
        return " ".join(parts)

    def to_text(self, max_violations: int = 50) -> str:
        lines = [self.summary()]
        lines += [f"note: {n}" for n in self.notes]
        for v in self.violations[:max_violations]:
            lines.append("violation: " + v.line())
        if len(self.violations) > max_violations:
            lines.append(f"... {len(self.violations) - max_violations} more violations")
        return "\n".join(lines) + "\n"

    def tsv_rows(self) -> list[str]:
        rows = []
        if self.per_seed:
            for s in sorted(self.per_seed):
                ok, w = self.per_seed[s]
                rows.append(f"{self.name}\t{s}\t{'pass' if ok else 'fail'}\t{'' if w is None else w}")
        else:
            w = "" if self.worst_slack is None else self.worst_slack
            rows.append(f"{self.name}\t-\t{'pass' if self.passed else 'fail'}\t{w}")
        return rows


def write_reports(reports: list[ExperimentReport], directory, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>.report.txt`` and ``<stem>.report.tsv``; returns both paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    txt = d / f"{stem}.report.txt"
    tsv = d / f"{stem}.report.tsv"
    txt.write_text("".join(r.to_text() for r in reports), encoding="utf-8")
    rows = ["name\tseed\tpass\tworst_slack"] + [row for r in reports for row in r.tsv_rows()]
    tsv.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return txt, tsv
