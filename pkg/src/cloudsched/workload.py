"""Workload ingestion, synthesis, and attribute normalization.

Trace files are CSV (UTF-8) with header
``id,exec_time,cost,sys_eff,resource_demand,arrival``; lines starting
with ``#`` are comments.
"""

from __future__ import annotations

import csv
import dataclasses
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

TRACE_COLUMNS = ("id", "exec_time", "cost", "sys_eff", "resource_demand", "arrival")


class TraceError(ValueError):
    """Raised for unreadable or malformed trace files."""


@dataclass
class Task:
    """One unit of work.

    ``waiting_since`` is runtime bookkeeping: the simulation time at which
    the task first entered the waiting queue, or None if it never waited.
    """

    id: int
    exec_time: float
    cost: float
    sys_eff: float
    resource_demand: int
    arrival: float = 0.0
    waiting_since: Optional[float] = None


@dataclass
class TaskSet:
    """Ordered collection of tasks with unique ids.

    ``normalized`` marks that exec_time, cost, sys_eff, and arrival have
    been min-max scaled into [0, 1]. resource_demand is a slot count and
    is never scaled.
    """

    tasks: tuple[Task, ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        ids = [t.id for t in self.tasks]
        if len(ids) != len(set(ids)):
            dup = sorted(i for i in set(ids) if ids.count(i) > 1)[0]
            raise ValueError(f"duplicate task id {dup} in task set")

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def by_id(self) -> dict[int, Task]:
        return {t.id: t for t in self.tasks}


@dataclass(frozen=True)
class AttrRanges:
    """Per-attribute (min, max) bounds for synthetic workloads.

    resource_demand bounds are integers (inclusive draw); all ranges must
    satisfy min < max and the task invariants.
    """

    exec_time: tuple[float, float] = (0.1, 1.0)
    cost: tuple[float, float] = (0.0, 1.0)
    sys_eff: tuple[float, float] = (0.0, 1.0)
    resource_demand: tuple[int, int] = (1, 3)
    arrival: tuple[float, float] = (0.0, 1.0)

    def validate(self) -> None:
        for name, (lo, hi) in self._items():
            if not lo < hi:
                raise ValueError(f"invalid {name} range: min {lo} must be < max {hi}")
        if self.exec_time[0] <= 0:
            raise ValueError("exec_time range must be strictly positive")
        if self.cost[0] < 0:
            raise ValueError("cost range must be non-negative")
        if self.sys_eff[0] < 0 or self.sys_eff[1] > 1:
            raise ValueError("sys_eff range must lie within [0, 1]")
        if self.resource_demand[0] < 1:
            raise ValueError("resource_demand range must start at >= 1")
        if self.arrival[0] < 0:
            raise ValueError("arrival range must be non-negative")

    def _items(self) -> list[tuple[str, tuple[float, float]]]:
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)]


def _check_raw_task(t: Task, where: str) -> None:
    """Validate raw (un-normalized) task invariants; `where` names the source row."""
    if t.id < 0:
        raise TraceError(f"{where}: column 'id' must be >= 0, got {t.id}")
    if not t.exec_time > 0:
        raise TraceError(f"{where}: column 'exec_time' must be > 0, got {t.exec_time}")
    if t.cost < 0:
        raise TraceError(f"{where}: column 'cost' must be >= 0, got {t.cost}")
    if not 0.0 <= t.sys_eff <= 1.0:
        raise TraceError(f"{where}: column 'sys_eff' must be in [0, 1], got {t.sys_eff}")
    if t.resource_demand < 1:
        raise TraceError(
            f"{where}: column 'resource_demand' must be >= 1, got {t.resource_demand}"
        )
    if t.arrival < 0:
        raise TraceError(f"{where}: column 'arrival' must be >= 0, got {t.arrival}")


def _parse_row(fields: Sequence[str], line_no: int) -> Task:
    where = f"row at line {line_no}"
    if len(fields) != len(TRACE_COLUMNS):
        raise TraceError(
            f"{where}: expected {len(TRACE_COLUMNS)} columns, got {len(fields)}"
        )
    values: dict[str, float] = {}
    for col, text in zip(TRACE_COLUMNS, fields):
        try:
            values[col] = int(text) if col in ("id", "resource_demand") else float(text)
        except ValueError:
            raise TraceError(f"{where}: column '{col}' is not numeric: {text!r}") from None
    task = Task(
        id=int(values["id"]),
        exec_time=values["exec_time"],
        cost=values["cost"],
        sys_eff=values["sys_eff"],
        resource_demand=int(values["resource_demand"]),
        arrival=values["arrival"],
    )
    _check_raw_task(task, where)
    return task


def load_trace(path: str | Path, limit: Optional[int] = None) -> TaskSet:
    """Read a trace CSV into a TaskSet, keeping the first `limit` rows in file order."""
    path = Path(path)
    if limit is not None and limit <= 0:
        raise ValueError("zero valid rows requested (limit must be >= 1)")
    if not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")

    tasks: list[Task] = []
    header_seen = False
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = next(csv.reader([line]))
            if not header_seen:
                if tuple(f.strip() for f in fields) != TRACE_COLUMNS:
                    raise TraceError(
                        f"row at line {line_no}: bad header, expected "
                        f"{','.join(TRACE_COLUMNS)}"
                    )
                header_seen = True
                continue
            tasks.append(_parse_row(fields, line_no))
            if limit is not None and len(tasks) >= limit:
                break
    if not header_seen:
        raise TraceError(f"{path}: no header row found")
    if not tasks:
        raise TraceError(f"{path}: zero valid rows")
    return TaskSet(tasks=tuple(tasks), normalized=False)


def save_trace(ts: TaskSet, path: str | Path) -> None:
    """Write a TaskSet back to trace CSV; floats use repr so load round-trips exactly."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for t in ts:
            fh.write(
                f"{t.id},{t.exec_time!r},{t.cost!r},{t.sys_eff!r},"
                f"{t.resource_demand},{t.arrival!r}\n"
            )


def synth_workload(seed: int, n: int, ranges: AttrRanges = AttrRanges()) -> TaskSet:
    """Generate n tasks with attributes uniform in `ranges`; ids are 0..n-1.

    Deterministic for a fixed (seed, n, ranges).
    """
    if n < 1:
        raise ValueError(f"workload size must be >= 1, got {n}")
    ranges.validate()
    rng = random.Random(seed)
    tasks = []
    for i in range(n):
        tasks.append(
            Task(
                id=i,
                exec_time=rng.uniform(*ranges.exec_time),
                cost=rng.uniform(*ranges.cost),
                sys_eff=rng.uniform(*ranges.sys_eff),
                resource_demand=rng.randint(*ranges.resource_demand),
                arrival=rng.uniform(*ranges.arrival),
            )
        )
    return TaskSet(tasks=tuple(tasks), normalized=False)


# Attributes subject to min-max scaling; demand stays a slot count, id an identifier.
_SCALED_ATTRS = ("exec_time", "cost", "sys_eff", "arrival")


def normalize(ts: TaskSet) -> TaskSet:
    """Min-max scale each attribute over the set into [0, 1].

    A constant attribute (max == min) maps to 0.0 everywhere, which keeps
    degenerate workloads runnable. Idempotent.
    """
    if len(ts) == 0:
        raise ValueError("cannot normalize an empty task set")
    lo = {a: min(getattr(t, a) for t in ts) for a in _SCALED_ATTRS}
    hi = {a: max(getattr(t, a) for t in ts) for a in _SCALED_ATTRS}

    def scale(attr: str, x: float) -> float:
        span = hi[attr] - lo[attr]
        if span == 0:
            return 0.0
        return (x - lo[attr]) / span

    tasks = tuple(
        dataclasses.replace(
            t, **{a: scale(a, getattr(t, a)) for a in _SCALED_ATTRS}
        )
        for t in ts
    )
    return TaskSet(tasks=tasks, normalized=True)
