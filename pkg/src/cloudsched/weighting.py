"""Task weighting and three-class priority grouping.

A task's scalar weight is a linear blend of its normalized execution
time, cost, and system efficiency. Tasks are grouped into priority
classes 1..3 (1 highest) by nearest class centroid.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .workload import Task, TaskSet

NUM_CLASSES = 3


@dataclass(frozen=True)
class ParamWeights:
    """Blend weights for exec-time, cost, and system-efficiency terms."""

    wp_et: float = 0.4
    wp_c: float = 0.3
    wp_se: float = 0.3

    def __post_init__(self) -> None:
        if min(self.wp_et, self.wp_c, self.wp_se) < 0:
            raise ValueError("parameter weights must be >= 0")
        if self.wp_et + self.wp_c + self.wp_se <= 0:
            raise ValueError("parameter weights must not all be zero")


@dataclass(frozen=True)
class TaskClassAssignment:
    """Class membership for one task.

    ``weight`` is the score the assignment was derived from (the blended
    task weight here; the winning network activation when a classifier
    produced it). ``flagged`` marks tasks whose distance to every
    centroid was >= the tolerance, assigned to the nearest class anyway.
    """

    task_id: int
    class_id: int
    weight: float
    flagged: bool = False

    def __post_init__(self) -> None:
        if self.class_id not in range(1, NUM_CLASSES + 1):
            raise ValueError(f"class_id must be in 1..{NUM_CLASSES}, got {self.class_id}")


def _require_normalized(t: Task) -> None:
    for attr in ("exec_time", "cost", "sys_eff"):
        v = getattr(t, attr)
        if not 0.0 <= v <= 1.0:
            raise ValueError(
                f"task {t.id}: {attr}={v} outside [0, 1]; normalize the workload first"
            )


def raw_weight(t: Task, wp: ParamWeights) -> float:
    """The weight blend without the normalization guard (similarity searches)."""
    return wp.wp_et * t.exec_time + wp.wp_c * t.cost + wp.wp_se * t.sys_eff


def task_weight(t: Task, wp: ParamWeights = ParamWeights()) -> float:
    """Blended weight of a normalized task: wp_et*ET + wp_c*C + wp_se*SE."""
    _require_normalized(t)
    return raw_weight(t, wp)


def derive_centroids(weights: Iterable[float], seed: int, iterations: int = 25) -> tuple[float, float, float]:
    """Three class-weight centroids from the weight distribution, descending.

    Seeded 1-D k-means (k=3, Lloyd updates, at most `iterations` passes).
    Empty clusters are re-seeded to the point farthest from its current
    centroid. Requires at least 3 distinct weight values.
    """
    values = sorted(weights)
    distinct = sorted(set(values))
    if len(distinct) < NUM_CLASSES:
        raise ValueError(
            f"need >= {NUM_CLASSES} distinct task weights to derive class centroids, "
            f"got {len(distinct)}"
        )
    rng = random.Random(seed)
    centers = sorted(rng.sample(distinct, NUM_CLASSES))

    for _ in range(iterations):
        clusters: list[list[float]] = [[] for _ in centers]
        for v in values:
            dists = [abs(v - c) for c in centers]
            clusters[dists.index(min(dists))].append(v)
        new_centers = []
        for ci, cluster in enumerate(clusters):
            if cluster:
                new_centers.append(sum(cluster) / len(cluster))
            else:
                # re-seed an empty cluster to the globally worst-fit point
                farthest = max(
                    values,
                    key=lambda v: min(abs(v - c) for c in centers),
                )
                new_centers.append(farthest)
        new_centers.sort()
        if new_centers == centers:
            break
        centers = new_centers

    ordered = tuple(sorted(centers, reverse=True))
    if not (ordered[0] > ordered[1] > ordered[2]):
        raise ValueError(f"class centroids collapsed: {ordered}")
    return ordered  # type: ignore[return-value]


def default_epsilon(centroids: Sequence[float]) -> float:
    """Default grouping tolerance: a quarter of the mean centroid spacing."""
    return 0.25 * (centroids[0] - centroids[-1]) / (len(centroids) - 1)


def assign_classes(
    weights: Sequence[tuple[int, float]],
    centroids: Sequence[float],
    epsilon: float,
) -> list[TaskClassAssignment]:
    """Assign each (task_id, weight) pair to the nearest-centroid class.

    Centroids must be strictly descending (class 1 carries the highest
    weight). Distance ties break toward the higher-priority (lower)
    class. A task farther than `epsilon` from every centroid is still
    assigned to the nearest one but flagged.
    """
    if len(centroids) != NUM_CLASSES or not all(
        a > b for a, b in zip(centroids, centroids[1:])
    ):
        raise ValueError(f"centroids must be strictly descending, got {tuple(centroids)}")
    out = []
    for task_id, tw in weights:
        dists = [abs(tw - cw) for cw in centroids]
        best = min(dists)
        class_id = dists.index(best) + 1  # index() takes the first == lowest r
        out.append(
            TaskClassAssignment(
                task_id=task_id,
                class_id=class_id,
                weight=tw,
                flagged=not best < epsilon,
            )
        )
    return out


def label_tasks(
    ts: TaskSet,
    wp: ParamWeights,
    seed: int,
    epsilon: float | None = None,
) -> tuple[list[TaskClassAssignment], tuple[float, float, float]]:
    """Weight every task and group it; returns (assignments, centroids).

    The returned assignments serve as ground-truth labels for training a
    classifier on the weighting rule.
    """
    pairs = [(t.id, task_weight(t, wp)) for t in ts]
    centroids = derive_centroids((w for _, w in pairs), seed=seed)
    if epsilon is None:
        epsilon = default_epsilon(centroids)
    return assign_classes(pairs, centroids, epsilon), centroids
