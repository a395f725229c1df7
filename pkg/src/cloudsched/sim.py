"""Discrete-event simulation: resources with VM slots, dispatcher, metrics.

The engine processes arrival and completion events in time order and
invokes the scheduling policy at every event boundary where pending
tasks and idle slots coexist (one policy invocation = one round).
Placement is greedy first-fit by ascending resource id.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .workload import Task, TaskSet

ARRIVAL = "arrival"
DISPATCH = "dispatch"
COMPLETION = "completion"


class CapacityError(RuntimeError):
    """Chosen set does not fit the free slots: the round was sized wrong."""


class InconsistentTableError(RuntimeError):
    """Resource-table bookkeeping violated an invariant."""


@dataclass
class Resource:
    id: int
    vm_slots: int
    busy_slots: int = 0
    speed_factor: float = 1.0
    cost_rate: float = 1.0

    def __post_init__(self) -> None:
        if self.vm_slots < 1:
            raise ValueError("vm_slots must be >= 1")
        if self.speed_factor <= 0 or self.cost_rate < 0:
            raise ValueError("speed_factor must be > 0 and cost_rate >= 0")

    @property
    def free_slots(self) -> int:
        return self.vm_slots - self.busy_slots


@dataclass
class ResourceTable:
    """Live slot occupancy plus which task runs where."""

    resources: list[Resource]
    running: dict[int, dict[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.resources = sorted(self.resources, key=lambda r: r.id)
        ids = [r.id for r in self.resources]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate resource ids")
        for r in self.resources:
            self.running.setdefault(r.id, {})

    def resource(self, resource_id: int) -> Resource:
        for r in self.resources:
            if r.id == resource_id:
                return r
        raise KeyError(f"no resource with id {resource_id}")

    def validate(self) -> None:
        seen: set[int] = set()
        for r in self.resources:
            demands = self.running.get(r.id, {})
            if sum(demands.values()) != r.busy_slots:
                raise InconsistentTableError(
                    f"resource {r.id}: busy_slots={r.busy_slots} but running demands "
                    f"sum to {sum(demands.values())}"
                )
            if not 0 <= r.busy_slots <= r.vm_slots:
                raise InconsistentTableError(
                    f"resource {r.id}: busy_slots={r.busy_slots} outside 0..{r.vm_slots}"
                )
            overlap = seen & set(demands)
            if overlap:
                raise InconsistentTableError(f"tasks on two resources: {sorted(overlap)}")
            seen |= set(demands)

    def place(self, task_id: int, demand: int, resource_id: int) -> None:
        r = self.resource(resource_id)
        if r.free_slots < demand:
            raise CapacityError(
                f"resource {resource_id} has {r.free_slots} free slots, task "
                f"{task_id} needs {demand}"
            )
        r.busy_slots += demand
        self.running[resource_id][task_id] = demand

    def release(self, task_id: int, resource_id: int) -> None:
        demand = self.running[resource_id].pop(task_id)
        self.resource(resource_id).busy_slots -= demand

    def first_fit(self, demand: int) -> Optional[int]:
        for r in self.resources:
            if r.free_slots >= demand:
                return r.id
        return None


def idle_count(rt: ResourceTable) -> int:
    """Total free slots across all resources."""
    rt.validate()
    return sum(r.free_slots for r in rt.resources)


@dataclass(frozen=True)
class EnvConfig:
    """Simulated environment; scalar fields broadcast across resources."""

    resources: int = 4
    vm_slots: int | tuple[int, ...] = 5
    speed_factors: float | tuple[float, ...] = 1.0
    cost_rates: float | tuple[float, ...] = 1.0

    def _per_resource(self, value, caster):
        if isinstance(value, (int, float)):
            return [caster(value)] * self.resources
        if len(value) != self.resources:
            raise ValueError(f"expected {self.resources} per-resource values, got {len(value)}")
        return [caster(v) for v in value]

    def build_table(self) -> ResourceTable:
        if self.resources < 1:
            raise ValueError("need at least one resource")
        slots = self._per_resource(self.vm_slots, int)
        speeds = self._per_resource(self.speed_factors, float)
        rates = self._per_resource(self.cost_rates, float)
        return ResourceTable(
            resources=[
                Resource(id=i, vm_slots=slots[i], speed_factor=speeds[i], cost_rate=rates[i])
                for i in range(self.resources)
            ]
        )


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str
    task_id: int
    resource_id: Optional[int] = None


@dataclass
class TaskRecord:
    task_id: int
    arrival: float
    dispatch: float
    first_response: float
    completion: float
    cost: float
    resource_id: int
    effective_exec: float
    demand: int
    round_index: int


@dataclass
class SimReport:
    """Outcome of one policy run: per-task records plus aggregates."""

    policy: str
    workload_fingerprint: str
    records: list[TaskRecord]
    events: list[SimEvent]
    total_slots: int
    first_arrival: float
    last_completion: float
    rounds: int

    def mean(self, attr_values: Sequence[float]) -> float:
        return math.fsum(attr_values) / len(attr_values)

    @property
    def mean_exec(self) -> float:
        return self.mean([r.effective_exec for r in self.records])

    @property
    def mean_cost(self) -> float:
        return self.mean([r.cost for r in self.records])

    @property
    def mean_response(self) -> float:
        return self.mean([r.dispatch - r.arrival for r in self.records])

    @property
    def total_cost(self) -> float:
        return math.fsum(r.cost for r in self.records)


def utilization(report: SimReport) -> float:
    """Busy slot-seconds over total slot-seconds across the run horizon."""
    horizon = report.last_completion - report.first_arrival
    if horizon <= 0:
        raise ValueError("cannot compute utilization of a zero-duration run")
    busy = math.fsum(r.demand * (r.completion - r.dispatch) for r in report.records)
    return busy / (report.total_slots * horizon)


def workload_fingerprint(ts: TaskSet) -> str:
    h = hashlib.sha256()
    for t in ts:
        h.update(
            f"{t.id},{t.exec_time!r},{t.cost!r},{t.sys_eff!r},"
            f"{t.resource_demand},{t.arrival!r};".encode()
        )
    return h.hexdigest()


class Policy(Protocol):
    """A scheduling policy: picks task ids to dispatch this round."""

    name: str
    blocking: bool  # head-of-line semantics for the placement filter

    def select(
        self, pending: list[Task], table: ResourceTable, now: float, round_index: int
    ) -> list[int]: ...


def dispatch(
    chosen: Sequence[int],
    rt: ResourceTable,
    now: float,
    tasks: dict[int, Task],
) -> list[SimEvent]:
    """Bind chosen tasks to resources, first-fit by ascending resource id.

    Emits one dispatch event per task at `now` and one completion event at
    now + exec_time * speed_factor. Fails loudly if anything does not fit.
    """
    total_demand = sum(tasks[tid].resource_demand for tid in chosen)
    if total_demand > idle_count(rt):
        raise CapacityError(
            f"chosen set needs {total_demand} slots, only {idle_count(rt)} idle"
        )
    events = []
    for tid in chosen:
        t = tasks[tid]
        rid = rt.first_fit(t.resource_demand)
        if rid is None:
            raise CapacityError(
                f"no single resource has {t.resource_demand} free slots for task {tid}"
            )
        rt.place(tid, t.resource_demand, rid)
        r = rt.resource(rid)
        events.append(SimEvent(time=now, kind=DISPATCH, task_id=tid, resource_id=rid))
        events.append(
            SimEvent(
                time=now + t.exec_time * r.speed_factor,
                kind=COMPLETION,
                task_id=tid,
                resource_id=rid,
            )
        )
    return events


def placement_filter(
    chosen: Sequence[int],
    rt: ResourceTable,
    tasks: dict[int, Task],
    blocking: bool,
) -> list[int]:
    """Drop tasks that would not place under first-fit right now.

    Mirrors dispatch() exactly, so a filtered set always dispatches. With
    `blocking`, filtering stops at the first task that does not fit
    (head-of-line semantics); otherwise unplaceable tasks are skipped.
    """
    free = {r.id: r.free_slots for r in rt.resources}
    order = sorted(free)
    admitted = []
    for tid in chosen:
        demand = tasks[tid].resource_demand
        slot = next((rid for rid in order if free[rid] >= demand), None)
        if slot is None:
            if blocking:
                break
            continue
        free[slot] -= demand
        admitted.append(tid)
    return admitted


def run(workload: TaskSet, policy: Policy, env: EnvConfig) -> SimReport:
    """Simulate one policy over the workload until every task completes."""
    if len(workload) == 0:
        raise ValueError("empty workload")
    table = env.build_table()
    max_slots = max(r.vm_slots for r in table.resources)
    for t in workload:
        if t.resource_demand > max_slots:
            raise ValueError(
                f"task {t.id} demands {t.resource_demand} slots; largest resource "
                f"has {max_slots}"
            )

    tasks = {t.id: dataclasses.replace(t) for t in workload}
    arrivals = sorted(tasks.values(), key=lambda t: (t.arrival, t.id))
    next_arrival = 0
    pending: list[Task] = []
    in_flight: list[tuple[float, int, int]] = []  # (completion time, task id, resource id)
    events: list[SimEvent] = []
    records: list[TaskRecord] = []
    rounds = 0

    while next_arrival < len(arrivals) or pending or in_flight:
        t_arr = arrivals[next_arrival].arrival if next_arrival < len(arrivals) else math.inf
        t_done = min((ct for ct, _, _ in in_flight), default=math.inf)
        now = min(t_arr, t_done)
        if math.isinf(now):
            raise RuntimeError(
                f"simulation stalled with {len(pending)} tasks pending and no events left"
            )

        # completions first so freed slots are visible to this round
        done_now = sorted(
            [e for e in in_flight if e[0] == now], key=lambda e: (e[1], e[2])
        )
        for ct, tid, rid in done_now:
            in_flight.remove((ct, tid, rid))
            table.release(tid, rid)
            events.append(SimEvent(time=now, kind=COMPLETION, task_id=tid, resource_id=rid))

        while next_arrival < len(arrivals) and arrivals[next_arrival].arrival == now:
            task = arrivals[next_arrival]
            pending.append(task)
            events.append(SimEvent(time=now, kind=ARRIVAL, task_id=task.id))
            next_arrival += 1

        if pending and idle_count(table) > 0:
            rounds += 1
            pending.sort(key=lambda t: (t.arrival, t.id))
            chosen = policy.select(list(pending), table, now, rounds)
            admitted = placement_filter(chosen, table, tasks, blocking=policy.blocking)
            if admitted:
                placed_on: dict[int, int] = {}
                for ev in dispatch(admitted, table, now, tasks):
                    if ev.kind == DISPATCH:
                        events.append(ev)
                        placed_on[ev.task_id] = ev.resource_id
                    else:
                        in_flight.append((ev.time, ev.task_id, ev.resource_id))
                chosen_set = set(admitted)
                pending = [t for t in pending if t.id not in chosen_set]
                for tid in admitted:
                    task = tasks[tid]
                    res = table.resource(placed_on[tid])
                    eff = task.exec_time * res.speed_factor
                    records.append(
                        TaskRecord(
                            task_id=tid,
                            arrival=task.arrival,
                            dispatch=now,
                            first_response=now,
                            completion=now + eff,
                            cost=eff * res.cost_rate * task.resource_demand,
                            resource_id=res.id,
                            effective_exec=eff,
                            demand=task.resource_demand,
                            round_index=rounds,
                        )
                    )
        table.validate()

    return SimReport(
        policy=policy.name,
        workload_fingerprint=workload_fingerprint(workload),
        records=records,
        events=events,
        total_slots=sum(r.vm_slots for r in table.resources),
        first_arrival=min(t.arrival for t in workload),
        last_completion=max(r.completion for r in records),
        rounds=rounds,
    )


def write_event_log(events: Sequence[SimEvent], path) -> None:
    """Event log CSV: time,kind,task_id,resource_id."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "kind", "task_id", "resource_id"])
        for e in events:
            writer.writerow(
                [repr(e.time), e.kind, e.task_id, "" if e.resource_id is None else e.resource_id]
            )


def report_to_dict(report: SimReport) -> dict:
    return {
        "policy": report.policy,
        "workload_fingerprint": report.workload_fingerprint,
        "rounds": report.rounds,
        "total_slots": report.total_slots,
        "first_arrival": report.first_arrival,
        "last_completion": report.last_completion,
        "aggregates": {
            "mean_exec": report.mean_exec,
            "mean_cost": report.mean_cost,
            "mean_response": report.mean_response,
            "total_cost": report.total_cost,
            "utilization": utilization(report),
        },
        "tasks": [dataclasses.asdict(r) for r in report.records],
        "events": [dataclasses.asdict(e) for e in report.events],
    }


def report_from_dict(d: dict) -> SimReport:
    return SimReport(
        policy=d["policy"],
        workload_fingerprint=d["workload_fingerprint"],
        records=[TaskRecord(**r) for r in d["tasks"]],
        events=[SimEvent(**e) for e in d["events"]],
        total_slots=d["total_slots"],
        first_arrival=d["first_arrival"],
        last_completion=d["last_completion"],
        rounds=d["rounds"],
    )
