"""Hybrid task-scheduling simulator: neural three-class task
classification feeding a genetic dispatch-set selector, with FIFO, SJF,
and roulette-GA baselines and a deterministic metrics harness."""

from .baselines import PolicyId, fifo_select, roulette_select, sjf_select
from .genetic import Chromosome, GaConfig, GaResult, evolve, fitness
from .network import NeuralModel, TrainConfig, classify, forward, performance, sigmoid, train
from .report import ComparisonTable, compare, per_task_series
from .scheduler import RoundPlan, WaitingQueue, promote_waiting, schedule_round, select_candidates
from .sim import EnvConfig, Resource, ResourceTable, SimEvent, SimReport, dispatch, idle_count, run, utilization
from .weighting import ParamWeights, TaskClassAssignment, assign_classes, derive_centroids, task_weight
from .workload import AttrRanges, Task, TaskSet, load_trace, normalize, save_trace, synth_workload

__version__ = "0.1.0"

__all__ = [
    "AttrRanges", "Chromosome", "ComparisonTable", "EnvConfig", "GaConfig",
    "GaResult", "NeuralModel", "ParamWeights", "PolicyId", "Resource",
    "ResourceTable", "RoundPlan", "SimEvent", "SimReport", "Task",
    "TaskClassAssignment", "TaskSet", "TrainConfig", "WaitingQueue",
    "assign_classes", "classify", "compare", "derive_centroids", "dispatch",
    "evolve", "fifo_select", "fitness", "forward", "idle_count", "load_trace",
    "normalize", "per_task_series", "performance", "promote_waiting",
    "roulette_select", "run", "save_trace", "schedule_round",
    "select_candidates", "sigmoid", "sjf_select", "synth_workload",
    "task_weight", "train", "utilization",
]
