"""Round orchestration: classify, promote waiting tasks, gate on idle
slots, and hand the admitted candidates to the genetic selector.

Tasks left behind by a round (candidates not chosen, plus tasks whose
class was never admitted) enter the waiting queue; queued tasks are
promoted one class per round and their fitness contributions carry the
fairness discount until they dispatch.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .genetic import GaConfig, evolve, gene_contribution
from .network import NeuralModel, classify
from .sim import ResourceTable, idle_count, placement_filter
from .weighting import NUM_CLASSES, TaskClassAssignment
from .workload import Task, TaskSet


@dataclass
class WaitingQueue:
    """Task ids waiting for dispatch, each with the round it entered."""

    entries: dict[int, int] = field(default_factory=dict)

    def __contains__(self, task_id: int) -> bool:
        return task_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> frozenset[int]:
        return frozenset(self.entries)

    def add(self, task_id: int, round_index: int) -> None:
        self.entries.setdefault(task_id, round_index)

    def discard(self, task_id: int) -> None:
        self.entries.pop(task_id, None)


@dataclass
class RoundPlan:
    """Everything one scheduling round decided."""

    round_index: int
    classified: list[TaskClassAssignment]
    candidates: tuple[int, ...]
    chosen: tuple[int, ...]
    deferred: tuple[int, ...]
    unadmitted: tuple[int, ...]
    idle: int
    best_fitness: Optional[float]
    fitness_trace: tuple[float, ...] = ()

    def class_sizes(self) -> dict[int, int]:
        sizes = {c: 0 for c in range(1, NUM_CLASSES + 1)}
        for a in self.classified:
            sizes[a.class_id] += 1
        return sizes


def promote_waiting(
    assignments: Sequence[TaskClassAssignment],
    queue: WaitingQueue,
    round_index: Optional[int] = None,
) -> list[TaskClassAssignment]:
    """Move queued tasks up one class per round waited; class 1 is the floor.

    Classification is memoryless, so the promotion earned by waiting is
    re-applied on top of each fresh assignment: one level per round since
    the task entered the queue (a class-3 task reaches class 1 after two
    waiting rounds). Without a round index, queued tasks move one level.
    """
    out = []
    for a in assignments:
        if a.task_id in queue and a.class_id > 1:
            if round_index is None:
                depth = 1
            else:
                depth = max(round_index - queue.entries[a.task_id], 1)
            out.append(dataclasses.replace(a, class_id=max(1, a.class_id - depth)))
        else:
            out.append(a)
    return out


def select_candidates(
    assignments: Sequence[TaskClassAssignment], idle_resources: int
) -> list[int]:
    """Class-1 tasks, widened with classes 2 then 3 while idle slots outnumber
    the accumulated candidates."""
    if idle_resources < 0:
        raise ValueError("idle_resources must be >= 0")
    by_class: dict[int, list[int]] = {c: [] for c in range(1, NUM_CLASSES + 1)}
    for a in assignments:
        by_class[a.class_id].append(a.task_id)
    candidates = list(by_class[1])
    for cls in range(2, NUM_CLASSES + 1):
        if idle_resources > len(candidates) and by_class[cls]:
            candidates.extend(by_class[cls])
    return candidates


def schedule_round(
    pending: Sequence[Task],
    queue: WaitingQueue,
    model: NeuralModel,
    table: ResourceTable,
    ga_cfg: GaConfig,
    now: float = 0.0,
    round_index: int = 1,
) -> RoundPlan:
    """Run one full scheduling round and update the waiting queue.

    The effective chromosome length is capped by the idle slot count; when
    the admitted candidates cannot even fill that, they are all dispatched
    directly instead of running the selector. Chosen sets are trimmed to
    what actually places on the current table, so dispatch cannot fail.
    """
    if not model.trained:
        raise ValueError("scheduler needs a trained classification model")
    tasks = {t.id: t for t in pending}
    ts = TaskSet(tasks=tuple(pending), normalized=True)

    assignments = promote_waiting(classify(model, ts), queue, round_index)
    idle = idle_count(table)
    candidates = select_candidates(assignments, idle)

    best_fitness: Optional[float] = None
    fitness_trace: tuple[float, ...] = ()
    length = min(ga_cfg.chrom_len, idle)

    def by_contribution(ids):
        # place cheaper-to-run tasks first so first-fit favors them
        return sorted(
            ids,
            key=lambda tid: (
                gene_contribution(tasks[tid], tid in queue, ga_cfg.fairness_factor),
                tid,
            ),
        )

    if idle == 0 or not candidates or length < 1:
        chosen: tuple[int, ...] = ()
    elif len(candidates) <= length:
        chosen = tuple(
            placement_filter(by_contribution(candidates), table, tasks, blocking=False)
        )
    else:
        cfg = dataclasses.replace(
            ga_cfg, chrom_len=length, seed=ga_cfg.seed + round_index
        )
        result = evolve(candidates, tasks, queue.ids(), cfg)
        best_fitness = result.best.fitness
        fitness_trace = tuple(result.best_fitness_per_generation)
        chosen = tuple(
            placement_filter(by_contribution(result.best.genes), table, tasks, blocking=False)
        )

    chosen_set = set(chosen)
    deferred = tuple(c for c in candidates if c not in chosen_set)
    unadmitted = tuple(
        t.id for t in pending if t.id not in chosen_set and t.id not in set(candidates)
    )

    for tid in chosen:
        queue.discard(tid)
    for tid in (*deferred, *unadmitted):
        queue.add(tid, round_index)
        if tasks[tid].waiting_since is None:
            tasks[tid].waiting_since = now

    return RoundPlan(
        round_index=round_index,
        classified=assignments,
        candidates=tuple(candidates),
        chosen=chosen,
        deferred=deferred,
        unadmitted=unadmitted,
        idle=idle,
        best_fitness=best_fitness,
        fitness_trace=fitness_trace,
    )


class ProposedPolicy:
    """Simulation adapter owning the waiting queue and the round log."""

    name = "proposed"
    blocking = False

    def __init__(self, model: NeuralModel, ga_cfg: GaConfig) -> None:
        self.model = model
        self.ga_cfg = ga_cfg
        self.queue = WaitingQueue()
        self.round_log: list[RoundPlan] = []

    def select(self, pending: list[Task], table: ResourceTable, now: float, round_index: int) -> list[int]:
        plan = schedule_round(
            pending, self.queue, self.model, table, self.ga_cfg,
            now=now, round_index=round_index,
        )
        self.round_log.append(plan)
        return list(plan.chosen)


def write_round_log(plans: Sequence[RoundPlan], path) -> None:
    """JSON-lines round log, one RoundPlan per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in plans:
            fh.write(
                json.dumps(
                    {
                        "round": p.round_index,
                        "class_sizes": {str(k): v for k, v in p.class_sizes().items()},
                        "idle": p.idle,
                        "chosen": list(p.chosen),
                        "deferred": list(p.deferred),
                        "unadmitted": list(p.unadmitted),
                        "best_fitness": p.best_fitness,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
