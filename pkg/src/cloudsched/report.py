"""Multi-policy comparison tables and per-task metric series.

Comparison cells are min-max normalized per column across policies
(constant columns map to 0). Lower is better for the time and cost
columns, higher for utility; the normalization itself is direction-free.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

from .sim import SimReport, utilization

COLUMNS = ("utility", "response_time", "cost", "exec_time")
CSV_HEADER = ("Algorithm", "Utility", "Response Time", "Cost", "Execution Time")
SERIES_METRICS = ("exec", "cost", "response")


@dataclass
class ComparisonTable:
    """Per-policy normalized metric cells plus the raw means they came from."""

    policies: tuple[str, ...]
    cells: dict[str, dict[str, float]]
    raw: dict[str, dict[str, float]]
    normalization: str = "min-max across policies per column; constant columns -> 0"


def _raw_metrics(report: SimReport) -> dict[str, float]:
    return {
        "utility": utilization(report),
        "response_time": report.mean_response,
        "cost": report.mean_cost,
        "exec_time": report.mean_exec,
    }


def compare(reports: Mapping[str, SimReport]) -> ComparisonTable:
    """Min-max normalize aggregate means across >= 2 runs of one workload."""
    if len(reports) < 2:
        raise ValueError("need at least two policy reports to compare")
    fingerprints = {r.workload_fingerprint for r in reports.values()}
    if len(fingerprints) != 1:
        raise ValueError("reports cover different workloads; comparison is meaningless")

    policies = tuple(reports.keys())
    raw = {p: _raw_metrics(r) for p, r in reports.items()}
    cells: dict[str, dict[str, float]] = {p: {} for p in policies}
    for col in COLUMNS:
        values = [raw[p][col] for p in policies]
        lo, hi = min(values), max(values)
        span = hi - lo
        for p in policies:
            cells[p][col] = 0.0 if span == 0 else (raw[p][col] - lo) / span
    return ComparisonTable(policies=policies, cells=cells, raw=raw)


def write_comparison_csv(table: ComparisonTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# normalization: {table.normalization}\n")
        for p in table.policies:
            raw = table.raw[p]
            fh.write(
                "# raw "
                + p
                + ": "
                + ", ".join(f"{c}={raw[c]!r}" for c in COLUMNS)
                + "\n"
            )
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for p in table.policies:
            writer.writerow([p] + [repr(table.cells[p][c]) for c in COLUMNS])


def read_comparison_csv(path) -> ComparisonTable:
    """Re-parse an emitted comparison CSV (normalized cells only)."""
    policies = []
    cells: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: not a comparison table")
    for row in rows[1:]:
        p = row[0]
        policies.append(p)
        cells[p] = {c: float(v) for c, v in zip(COLUMNS, row[1:])}
    return ComparisonTable(policies=tuple(policies), cells=cells, raw={})


def per_task_series(report: SimReport, metric: str) -> list[tuple[int, float]]:
    """(task_id, value) pairs in dispatch order for one metric."""
    if metric == "exec":
        return [(r.task_id, r.effective_exec) for r in report.records]
    if metric == "cost":
        return [(r.task_id, r.cost) for r in report.records]
    if metric == "response":
        return [(r.task_id, r.dispatch - r.arrival) for r in report.records]
    raise ValueError(f"unknown metric {metric!r}; expected one of {SERIES_METRICS}")


def write_series_csv(series: Sequence[tuple[int, float]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_id", "value"])
        for tid, value in series:
            writer.writerow([tid, repr(value)])
