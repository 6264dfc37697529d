"""Campaign statistics, Fault Detection Ratio and failure-distribution export."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Optional

from .engine import TestVerdict, Verdict
from .geometry import Role
from .morph import Phase

CSV_COLUMNS = ("x", "y", "role", "class", "seed_index")


def round_sig(value: float, digits: int = 1) -> float:
    """Round half-up to ``digits`` significant figures (display only)."""
    if value == 0:
        return 0.0
    d = Decimal(repr(value))
    quantum = Decimal(1).scaleb(d.adjusted() - digits + 1)
    return float(d.quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class CampaignReport:
    method: Phase
    marker_count_range: str
    n_tests: int
    n_tp: int
    n_fp: int
    n_fn: int
    fdr: float

    def __post_init__(self):
        if self.n_tests != self.n_tp + self.n_fp + self.n_fn:
            raise ValueError("n_tests must equal TP + FP + FN")

    @property
    def n_failed(self) -> int:
        return self.n_fp + self.n_fn

    @property
    def fdr_display(self) -> float:
        return round_sig(self.fdr, 1)

    def to_json(self) -> dict:
        obj = asdict(self)
        obj["method"] = self.method.value
        obj["fdr_display"] = self.fdr_display
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "CampaignReport":
        return cls(Phase(obj["method"]), obj["marker_count_range"], obj["n_tests"],
                   obj["n_tp"], obj["n_fp"], obj["n_fn"], obj["fdr"])


def report_from_counts(method, marker_range: str, n_tp: int, n_fp: int, n_fn: int) -> CampaignReport:
    n = n_tp + n_fp + n_fn
    if n == 0:
        raise ValueError("cannot summarise an empty campaign")
    return CampaignReport(Phase(method), marker_range, n, n_tp, n_fp, n_fn, (n_fp + n_fn) / n)


def marker_range_of(verdicts: Iterable[TestVerdict]) -> str:
    lengths = {len(v.sample) for v in verdicts}
    lo, hi = min(lengths), max(lengths)
    return str(lo) if lo == hi else f"{lo} - {hi}"


def summarize(verdicts, method, marker_range: Optional[str] = None) -> CampaignReport:
    verdicts = list(verdicts)
    if not verdicts:
        raise ValueError("cannot summarise an empty verdict list")
    counts = Counter(v.outcome for v in verdicts)
    return report_from_counts(
        method,
        marker_range if marker_range is not None else marker_range_of(verdicts),
        counts[Verdict.TP], counts[Verdict.FP], counts[Verdict.FN],
    )


def format_table(reports: Iterable[CampaignReport]) -> str:
    """Plain-text table in the layout of the usual test execution summary."""
    header = ("Method", "No. of markers", "No. of tests", "TPs", "FPs", "FNs", "FDR")
    rows = [header]
    for r in reports:
        rows.append((
            r.method.value.capitalize(), r.marker_count_range, str(r.n_tests),
            str(r.n_tp), str(r.n_fp), str(r.n_fn), f"{r.fdr_display:g}",
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for k, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_report(report: CampaignReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def failure_rows(verdicts, class_filter: Verdict):
    class_filter = Verdict(class_filter)
    for v in verdicts:
        if v.outcome is not class_filter:
            continue
        for m, role in zip(v.sample.markers, v.sample.roles):
            yield (m.x, m.y, role.value, v.outcome.value, v.seed_index)


def export_failure_distribution(verdicts, class_filter, out=None) -> str:
    """CSV of every marker of every failed test in ``class_filter``.

    Columns are ``x,y,role,class,seed_index``. Writes to ``out`` (path or
    text stream) when given and always returns the CSV text.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(failure_rows(verdicts, class_filter))
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text


def failed_tests_in_csv(text: str) -> int:
    """Number of tests represented in a failure CSV (each carries three true-marker rows)."""
    rows = list(csv.DictReader(io.StringIO(text)))
    n_true = sum(1 for r in rows if r["role"] == Role.TRUE_MARKER.value)
    if n_true % 3:
        raise ValueError("failure CSV is truncated: true-marker rows not a multiple of three")
    return n_true // 3
