"""Exhaustive reference optimum for the dispatch-set selection problem."""

from __future__ import annotations

import itertools
from typing import Collection, Mapping

from .genetic import FAIRNESS_PER_GENE, Chromosome, fitness
from .workload import Task

ENUMERATION_BOUND = 20


def brute_force(
    candidates: Collection[int],
    tasks: Mapping[int, Task],
    chrom_len: int,
    queue: Collection[int] = frozenset(),
    fairness_factor: float = 0.9,
    fairness_mode: str = FAIRNESS_PER_GENE,
) -> tuple[float, tuple[int, ...]]:
    """Enumerate every chrom_len-subset; return (optimum fitness, subset).

    Ties resolve to the lexicographically smallest subset. Refuses more
    than ENUMERATION_BOUND candidates.
    """
    cands = sorted(candidates)
    if len(cands) > ENUMERATION_BOUND:
        raise ValueError(
            f"{len(cands)} candidates exceed the enumeration bound of {ENUMERATION_BOUND}"
        )
    if len(cands) < chrom_len:
        raise ValueError(f"{len(cands)} candidates cannot fill a {chrom_len}-subset")
    best_fit: float | None = None
    best_subset: tuple[int, ...] = ()
    for combo in itertools.combinations(cands, chrom_len):
        f = fitness(
            Chromosome(genes=combo), tasks, queue, fairness_factor, fairness_mode
        )
        if best_fit is None or f < best_fit:
            best_fit = f
            best_subset = combo
    assert best_fit is not None
    return best_fit, best_subset
