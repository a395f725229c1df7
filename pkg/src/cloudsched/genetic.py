"""Genetic selection of a fixed-size dispatch set from candidate tasks.

Chromosomes are fixed-length sequences of distinct task ids (decimal
encoding). Fitness is the sum over genes of estimated response time plus
slot demand, discounted by the fairness factor for tasks already waiting
in the queue; lower is better.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from typing import Collection, Mapping, Optional, Sequence

from .weighting import ParamWeights, raw_weight
from .workload import Task

FAIRNESS_PER_GENE = "per_gene"
FAIRNESS_CHROMOSOME = "chromosome"

STOP_MAX_ITERATIONS = "max iterations"
STOP_STATIONARY = "stationary best"
STOP_SINGLE_POINT = "single feasible point"


@dataclass
class Chromosome:
    """Distinct task ids in selection order, with cached fitness (lower wins)."""

    genes: tuple[int, ...]
    fitness: Optional[float] = None

    def __post_init__(self) -> None:
        if len(set(self.genes)) != len(self.genes):
            raise ValueError(f"duplicate genes in chromosome: {self.genes}")


@dataclass(frozen=True)
class GaConfig:
    """Run parameters for the evolutionary search."""

    pop_size: int = 500
    chrom_len: int = 10
    mutation_rate: float = 0.05
    elite_fraction: float = 0.2
    max_iterations: int = 100
    patience: int = 25
    seed: int = 0
    fairness_factor: float = 0.9
    fairness_mode: str = FAIRNESS_PER_GENE
    local_search_k: int = 5
    param_weights: ParamWeights = ParamWeights()

    def __post_init__(self) -> None:
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if self.chrom_len < 1:
            raise ValueError("chrom_len must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction must be in (0, 1]")
        if not 0.0 < self.fairness_factor <= 1.0:
            raise ValueError("fairness_factor must be in (0, 1]")
        if self.max_iterations < 0 or self.patience < 1 or self.local_search_k < 1:
            raise ValueError("max_iterations >= 0, patience >= 1, local_search_k >= 1")
        if self.fairness_mode not in (FAIRNESS_PER_GENE, FAIRNESS_CHROMOSOME):
            raise ValueError(f"unknown fairness_mode: {self.fairness_mode}")


@dataclass
class GaResult:
    best: Chromosome
    best_fitness_per_generation: list[float]
    generations_run: int
    stop_reason: str


def response_time_estimate(t: Task) -> float:
    """Pre-dispatch response-time estimate for a task.

    The estimate is the task's execution-time requirement: the forward
    cost of serving it. Wait already accrued is sunk and deliberately
    excluded; charging it would make queued tasks ever less attractive
    and defeat the fairness discount.
    """
    return t.exec_time


def gene_contribution(t: Task, queued: bool, fairness_factor: float) -> float:
    """One gene's fitness term: response-time estimate plus slot demand,
    scaled by the fairness factor while the task waits in the queue."""
    c = response_time_estimate(t) + t.resource_demand
    return fairness_factor * c if queued else c


def fitness(
    c: Chromosome,
    tasks: Mapping[int, Task],
    queue: Collection[int],
    fairness_factor: float,
    fairness_mode: str = FAIRNESS_PER_GENE,
) -> float:
    """Chromosome fitness; exact (order-independent) gene sum via fsum."""
    queued = set(queue)
    terms = []
    for g in c.genes:
        if g not in tasks:
            raise KeyError(f"unknown task id in chromosome: {g}")
        if fairness_mode == FAIRNESS_PER_GENE:
            terms.append(gene_contribution(tasks[g], g in queued, fairness_factor))
        else:
            terms.append(gene_contribution(tasks[g], False, fairness_factor))
    total = math.fsum(terms)
    if fairness_mode == FAIRNESS_CHROMOSOME and any(g in queued for g in c.genes):
        total = fairness_factor * total
    return total


class _Evaluator:
    """Precomputed per-candidate contributions for fast repeated scoring."""

    def __init__(
        self,
        tasks: Mapping[int, Task],
        queue: Collection[int],
        cfg: GaConfig,
    ) -> None:
        self.mode = cfg.fairness_mode
        self.factor = cfg.fairness_factor
        self.queued = frozenset(queue)
        self.base = {
            tid: response_time_estimate(t) + t.resource_demand
            for tid, t in tasks.items()
        }
        self.effective = {
            tid: self.factor * b if tid in self.queued else b
            for tid, b in self.base.items()
        }

    def __call__(self, genes: Sequence[int]) -> float:
        if self.mode == FAIRNESS_PER_GENE:
            return math.fsum(self.effective[g] for g in genes)
        total = math.fsum(self.base[g] for g in genes)
        if any(g in self.queued for g in genes):
            total = self.factor * total
        return total


def init_population(
    candidates: Sequence[int], cfg: GaConfig, rng: random.Random
) -> list[Chromosome]:
    """pop_size chromosomes, each a uniform random chrom_len-subset of candidates."""
    if len(set(candidates)) != len(candidates):
        raise ValueError("candidate ids must be unique")
    if len(candidates) < cfg.chrom_len:
        raise ValueError(
            f"{len(candidates)} candidates cannot fill chromosomes of length {cfg.chrom_len}"
        )
    return [
        Chromosome(genes=tuple(rng.sample(candidates, cfg.chrom_len)))
        for _ in range(cfg.pop_size)
    ]


def select_elite(population: Sequence[Chromosome], elite_fraction: float) -> list[Chromosome]:
    """The ceil(fraction * size) lowest-fitness chromosomes, ties by gene order."""
    if not population:
        raise ValueError("cannot select from an empty population")
    if not 0.0 < elite_fraction <= 1.0:
        raise ValueError("elite_fraction must be in (0, 1]")
    k = math.ceil(elite_fraction * len(population))
    ranked = sorted(population, key=lambda c: (c.fitness, c.genes))
    return ranked[:k]


def _repair(child: list[int], base: Sequence[int], donor: Sequence[int], a: int, b: int) -> tuple[int, ...]:
    """Restore gene distinctness, scanning left to right.

    A duplicate is first replaced by the other parent's gene at the same
    position, then by the lowest unused id from the parents' union.
    """
    union = sorted(set(base) | set(donor))
    used: set[int] = set()
    out: list[int] = []
    for k, g in enumerate(child):
        if g not in used:
            used.add(g)
            out.append(g)
            continue
        mirror = base[k] if a <= k < b else donor[k]
        if mirror not in used:
            used.add(mirror)
            out.append(mirror)
            continue
        fallback = next(x for x in union if x not in used)
        used.add(fallback)
        out.append(fallback)
    return tuple(out)


def crossover_at(p1: Chromosome, p2: Chromosome, a: int, b: int) -> tuple[Chromosome, Chromosome]:
    """Two-point crossover at fixed cuts 0 < a < b <= L, with duplicate repair."""
    L = len(p1.genes)
    if len(p2.genes) != L:
        raise ValueError("parents must share chromosome length")
    if not 0 < a < b <= L:
        raise ValueError(f"cut points must satisfy 0 < a < b <= {L}, got ({a}, {b})")
    g1 = list(p1.genes)
    g2 = list(p2.genes)
    g1[a:b], g2[a:b] = g2[a:b], g1[a:b]
    return (
        Chromosome(genes=_repair(g1, p1.genes, p2.genes, a, b)),
        Chromosome(genes=_repair(g2, p2.genes, p1.genes, a, b)),
    )


def crossover_two_point(
    p1: Chromosome, p2: Chromosome, rng: random.Random
) -> tuple[Chromosome, Chromosome]:
    """Two-point crossover with cuts drawn position-first: a, then b > a."""
    L = len(p1.genes)
    if L < 2:
        raise ValueError("two-point crossover needs chromosomes of length >= 2")
    a = rng.randrange(1, L)
    b = rng.randrange(a + 1, L + 1)
    return crossover_at(p1, p2, a, b)


def naive_mutation(
    c: Chromosome, unused: Sequence[int], rng: random.Random
) -> tuple[tuple[int, ...], int, int]:
    """Random-reset mutation: one uniform position, one uniform unused id.

    Returns (mutated genes, position, removed gene). Consumes exactly two
    rng draws: position, then replacement.
    """
    pos = rng.randrange(len(c.genes))
    replacement = rng.choice(unused)
    genes = list(c.genes)
    removed = genes[pos]
    genes[pos] = replacement
    return tuple(genes), pos, removed


def mutate_with_local_search(
    c: Chromosome,
    candidates: Sequence[int],
    tasks: Mapping[int, Task],
    queue: Collection[int],
    cfg: GaConfig,
    rng: random.Random,
) -> Chromosome:
    """Rate-gated mutation followed by a weight-neighborhood local search.

    One uniform draw gates the operator. On mutation the naive replacement
    competes against the local_search_k unused candidates nearest in
    blended task weight to the removed gene; the lowest-fitness variant
    wins, so the result is never worse than the naive mutant. Degenerate
    pools (no unused candidate) return the input unchanged.
    """
    gate = rng.random()
    unused = sorted(set(candidates) - set(c.genes))
    if not unused or gate >= cfg.mutation_rate:
        return c
    ev = _Evaluator(tasks, queue, cfg)
    genes, pos, removed = naive_mutation(c, unused, rng)
    replacement = genes[pos]

    target_w = raw_weight(tasks[removed], cfg.param_weights)
    neighbors = sorted(
        (x for x in unused if x != replacement),
        key=lambda x: (abs(raw_weight(tasks[x], cfg.param_weights) - target_w), x),
    )[: cfg.local_search_k]

    best_genes, best_fit = genes, ev(genes)
    trial = list(genes)
    for cand in neighbors:
        trial[pos] = cand
        f = ev(trial)
        if f < best_fit:
            best_fit = f
            best_genes = tuple(trial)
    return Chromosome(genes=best_genes, fitness=best_fit)


def evolve(
    candidates: Sequence[int],
    tasks: Mapping[int, Task],
    queue: Collection[int],
    cfg: GaConfig,
) -> GaResult:
    """Elitism -> two-point crossover -> mutation, generation by generation.

    The best chromosome is always carried unmodified, so the recorded
    per-generation best fitness never increases. Stops when the best is
    unchanged for cfg.patience generations or at cfg.max_iterations.
    """
    cands = sorted(candidates)
    rng = random.Random(cfg.seed)
    ev = _Evaluator(tasks, queue, cfg)

    population = init_population(cands, cfg, rng)
    for c in population:
        c.fitness = ev(c.genes)
    best = min(population, key=lambda c: (c.fitness, c.genes))
    trace = [best.fitness]

    if len(cands) == cfg.chrom_len:
        return GaResult(best=best, best_fitness_per_generation=trace,
                        generations_run=0, stop_reason=STOP_SINGLE_POINT)

    stall = 0
    generations = 0
    stop = STOP_MAX_ITERATIONS
    for generations in range(1, cfg.max_iterations + 1):
        elites = select_elite(population, cfg.elite_fraction)
        next_pop: list[Chromosome] = list(elites)
        while len(next_pop) < cfg.pop_size:
            if len(elites) >= 2:
                pa, pb = rng.sample(elites, 2)
            else:
                pa = pb = elites[0]
            if cfg.chrom_len >= 2:
                children = crossover_two_point(pa, pb, rng)
            else:
                children = (Chromosome(genes=pa.genes), Chromosome(genes=pb.genes))
            for child in children:
                child = mutate_with_local_search(child, cands, tasks, queue, cfg, rng)
                if child.fitness is None:
                    child.fitness = ev(child.genes)
                next_pop.append(child)
        population = next_pop[: cfg.pop_size]

        gen_best = min(population, key=lambda c: (c.fitness, c.genes))
        if gen_best.fitness < best.fitness:
            best = gen_best
            stall = 0
        else:
            stall += 1
        trace.append(best.fitness)
        if stall >= cfg.patience:
            stop = STOP_STATIONARY
            break

    return GaResult(
        best=best,
        best_fitness_per_generation=trace,
        generations_run=generations,
        stop_reason=stop,
    )


def write_fitness_trace(trace: Sequence[float], path) -> None:
    """Per-generation best-fitness CSV: generation,best_fitness."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_fitness"])
        for gen, fit in enumerate(trace):
            writer.writerow([gen, repr(fit)])
