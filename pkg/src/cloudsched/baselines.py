"""Reference selection policies: FIFO, SJF, and a roulette-wheel elitist GA.

FIFO admits strictly in arrival order and blocks at the head of the line;
SJF sorts by execution time and skips tasks that do not fit. The roulette
variant mirrors the main GA but selects parents fitness-proportionally
(over 1/fitness), keeps a single elite, runs at most 20 generations, and
applies no fairness discount.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from . import genetic
from .genetic import Chromosome, GaConfig
from .sim import ResourceTable, idle_count
from .workload import Task

ROULETTE_GENERATION_CAP = 20


class PolicyId(str, Enum):
    FIFO = "fifo"
    SJF = "sjf"
    ROULETTE_GA = "roulette_ga"
    PROPOSED = "proposed"


def fifo_select(pending: Sequence[Task], idle_slots: int) -> list[int]:
    """Admit tasks in arrival order (ties by id) while their demands fit.

    Head-of-line blocking: the first task that does not fit stops admission.
    """
    chosen: list[int] = []
    remaining = idle_slots
    for t in sorted(pending, key=lambda t: (t.arrival, t.id)):
        if t.resource_demand > remaining:
            break
        remaining -= t.resource_demand
        chosen.append(t.id)
    return chosen


def sjf_select(pending: Sequence[Task], idle_slots: int) -> list[int]:
    """Admit shortest tasks first (ties by id), skipping any that do not fit."""
    chosen: list[int] = []
    remaining = idle_slots
    for t in sorted(pending, key=lambda t: (t.exec_time, t.id)):
        if t.resource_demand > remaining:
            continue
        remaining -= t.resource_demand
        chosen.append(t.id)
    return chosen


def roulette_select(
    candidates: Sequence[int],
    tasks: Mapping[int, Task],
    cfg: GaConfig,
) -> list[int]:
    """Best dispatch set found by the roulette-wheel GA; returns its genes."""
    cands = sorted(candidates)
    if len(cands) < cfg.chrom_len:
        raise ValueError(
            f"{len(cands)} candidates cannot fill chromosomes of length {cfg.chrom_len}"
        )
    rng = random.Random(cfg.seed)
    ev = genetic._Evaluator(tasks, frozenset(), cfg)  # no fairness queue

    population = genetic.init_population(cands, cfg, rng)
    for c in population:
        c.fitness = ev(c.genes)
    best = min(population, key=lambda c: (c.fitness, c.genes))
    if len(cands) == cfg.chrom_len:
        return list(best.genes)

    for _ in range(ROULETTE_GENERATION_CAP):
        weights = [1.0 / c.fitness if c.fitness > 0 else 1e12 for c in population]
        next_pop = [best]  # single-elite carry
        while len(next_pop) < cfg.pop_size:
            pa, pb = rng.choices(population, weights=weights, k=2)
            if cfg.chrom_len >= 2:
                children = genetic.crossover_two_point(pa, pb, rng)
            else:
                children = (Chromosome(genes=pa.genes), Chromosome(genes=pb.genes))
            for child in children:
                child = genetic.mutate_with_local_search(
                    child, cands, tasks, frozenset(), cfg, rng
                )
                if child.fitness is None:
                    child.fitness = ev(child.genes)
                next_pop.append(child)
        population = next_pop[: cfg.pop_size]
        gen_best = min(population, key=lambda c: (c.fitness, c.genes))
        if gen_best.fitness < best.fitness:
            best = gen_best
    return list(best.genes)


class FifoPolicy:
    name = PolicyId.FIFO.value
    blocking = True

    def select(self, pending: list[Task], table: ResourceTable, now: float, round_index: int) -> list[int]:
        return fifo_select(pending, idle_count(table))


class SjfPolicy:
    name = PolicyId.SJF.value
    blocking = False

    def select(self, pending: list[Task], table: ResourceTable, now: float, round_index: int) -> list[int]:
        return sjf_select(pending, idle_count(table))


class RouletteGaPolicy:
    """Round adapter: per-round seeds derive from cfg.seed + round index."""

    name = PolicyId.ROULETTE_GA.value
    blocking = False

    def __init__(self, cfg: GaConfig) -> None:
        self.cfg = cfg

    def select(self, pending: list[Task], table: ResourceTable, now: float, round_index: int) -> list[int]:
        idle = idle_count(table)
        length = min(self.cfg.chrom_len, idle, len(pending))
        if length < 1:
            return []
        ids = [t.id for t in pending]
        if len(ids) <= length:
            return ids
        cfg = dataclasses.replace(
            self.cfg, chrom_len=length, seed=self.cfg.seed + round_index
        )
        tasks = {t.id: t for t in pending}
        return roulette_select(ids, tasks, cfg)
