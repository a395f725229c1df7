import json
import math

import numpy as np
import pytest

from cloudsched.genetic import GaConfig, gene_contribution
from cloudsched.network import EpochRecord, NeuralModel, TrainingLog
from cloudsched.scheduler import (
    ProposedPolicy,
    RoundPlan,
    WaitingQueue,
    promote_waiting,
    schedule_round,
    select_candidates,
    write_round_log,
)
from cloudsched.sim import EnvConfig, run
from cloudsched.weighting import TaskClassAssignment
from cloudsched.workload import normalize, synth_workload
from conftest import make_set, make_task


def fabricated_log():
    return TrainingLog(
        records=[
            EpochRecord(0, 1.0, 1.0, 1.0, 1.0),
            EpochRecord(1, 0.5, 0.6, 0.6, 0.5),
        ],
        stop_reason="max epochs",
    )


def exec_threshold_model():
    """Hand-built net: exec_time > 0.5 lands in class 1, else class 2."""
    return NeuralModel(
        layers=(3, 1, 3),
        weights=[np.array([[4.0, 0.0, 0.0]]), np.array([[8.0], [-8.0], [0.0]])],
        biases=[np.array([-2.0]), np.array([-4.0, 4.0, -10.0])],
        log=fabricated_log(),
    )


def assignments_of(pairs):
    return [TaskClassAssignment(task_id=t, class_id=c, weight=0.0) for t, c in pairs]


class TestPromoteWaiting:
    def test_queued_class_two_moves_to_one(self):
        q = WaitingQueue(entries={7: 1})
        [a] = promote_waiting(assignments_of([(7, 2)]), q, round_index=2)
        assert a.class_id == 1

    def test_class_one_is_the_floor(self):
        q = WaitingQueue(entries={7: 1})
        [a] = promote_waiting(assignments_of([(7, 1)]), q, round_index=5)
        assert a.class_id == 1

    def test_empty_queue_is_identity(self):
        assignments = assignments_of([(1, 3), (2, 2), (3, 1)])
        assert promote_waiting(assignments, WaitingQueue(), round_index=4) == assignments

    def test_one_level_per_waiting_round(self):
        q = WaitingQueue(entries={9: 1})
        [a] = promote_waiting(assignments_of([(9, 3)]), q, round_index=2)
        assert a.class_id == 2
        [a] = promote_waiting(assignments_of([(9, 3)]), q, round_index=3)
        assert a.class_id == 1

    def test_non_queued_tasks_untouched(self):
        q = WaitingQueue(entries={1: 1})
        out = promote_waiting(assignments_of([(1, 3), (2, 3)]), q, round_index=2)
        assert [a.class_id for a in out] == [2, 3]


class TestSelectCandidates:
    def test_enough_class_one_tasks_stay_alone(self):
        assignments = assignments_of([(i, 1) for i in range(12)] + [(100, 2)])
        assert select_candidates(assignments, idle_resources=10) == list(range(12))

    def test_widens_through_class_two_and_three(self):
        assignments = assignments_of(
            [(i, 1) for i in range(4)] + [(10 + i, 2) for i in range(4)] + [(20, 3)]
        )
        got = select_candidates(assignments, idle_resources=10)
        assert got == [0, 1, 2, 3, 10, 11, 12, 13, 20]

    def test_stops_once_candidates_cover_idle(self):
        assignments = assignments_of(
            [(i, 1) for i in range(4)] + [(10 + i, 2) for i in range(8)] + [(20, 3)]
        )
        got = select_candidates(assignments, idle_resources=10)
        assert 20 not in got  # classes 1+2 already cover the 10 idle slots

    def test_all_classes_empty(self):
        assert select_candidates([], idle_resources=5) == []

    def test_zero_idle_still_returns_class_one(self):
        assignments = assignments_of([(1, 1), (2, 2)])
        assert select_candidates(assignments, idle_resources=0) == [1]

    def test_negative_idle_rejected(self):
        with pytest.raises(ValueError):
            select_candidates([], idle_resources=-1)


def normalized_workload(seed=13, n=30, **kw):
    return normalize(synth_workload(seed=seed, n=n, **kw))


class TestScheduleRound:
    def setup_method(self):
        self.model = exec_threshold_model()
        self.ga = GaConfig(pop_size=30, chrom_len=10, max_iterations=40, patience=10, seed=5)

    def test_full_round_chooses_chrom_len_tasks(self):
        tasks = [make_task(i, exec_time=(i % 10) / 10, cost=(i % 7) / 7) for i in range(30)]
        table = EnvConfig(resources=2, vm_slots=5).build_table()
        plan = schedule_round(tasks, WaitingQueue(), self.model, table, self.ga)
        assert len(plan.chosen) == 10
        assert plan.idle == 10

    def test_zero_idle_defers_all_candidates(self):
        ts = normalized_workload(n=8)
        table = EnvConfig(resources=1, vm_slots=2).build_table()
        table.place(900, 2, 0)  # saturate
        q = WaitingQueue()
        plan = schedule_round(list(ts), q, self.model, table, self.ga)
        assert plan.chosen == ()
        assert set(plan.deferred) == set(plan.candidates)
        assert set(plan.deferred) | set(plan.unadmitted) == {t.id for t in ts}
        assert q.ids() == {t.id for t in ts}

    def test_conservation_partition(self):
        ts = normalized_workload(n=25)
        table = EnvConfig(resources=2, vm_slots=3).build_table()
        plan = schedule_round(list(ts), WaitingQueue(), self.model, table, self.ga)
        chosen, deferred, unadmitted = set(plan.chosen), set(plan.deferred), set(plan.unadmitted)
        assert chosen | deferred | unadmitted == {t.id for t in ts}
        assert chosen.isdisjoint(deferred)
        assert chosen.isdisjoint(unadmitted)
        assert deferred.isdisjoint(unadmitted)
        assert chosen <= set(plan.candidates)

    def test_deterministic_replay(self):
        ts = normalized_workload(n=25)
        plans = []
        for _ in range(2):
            table = EnvConfig(resources=2, vm_slots=3).build_table()
            plans.append(
                schedule_round(list(ts), WaitingQueue(), self.model, table, self.ga)
            )
        assert plans[0] == plans[1]

    def test_untrained_model_rejected(self):
        m = exec_threshold_model()
        m.log = None
        ts = normalized_workload(n=5)
        table = EnvConfig().build_table()
        with pytest.raises(ValueError, match="trained"):
            schedule_round(list(ts), WaitingQueue(), m, table, self.ga)

    def test_two_round_fairness_mechanics(self):
        # round 1: class-2 task misses dispatch and enters the queue;
        # round 2: it is promoted to class 1 and its fitness term carries 0.9
        tasks = [
            make_task(0, exec_time=0.9),   # class 1 under the threshold model
            make_task(1, exec_time=0.8),
            make_task(2, exec_time=0.2),   # class 2
        ]
        table = EnvConfig(resources=1, vm_slots=2).build_table()
        ga = GaConfig(pop_size=4, chrom_len=2, max_iterations=10, seed=1)
        q = WaitingQueue()
        plan1 = schedule_round(tasks, q, self.model, table, ga, now=0.0, round_index=1)
        assert len(plan1.chosen) == 2
        assert 2 in q  # the class-2 task was never admitted
        class_of_2 = {a.task_id: a.class_id for a in plan1.classified}[2]
        assert class_of_2 == 2

        pending = [t for t in tasks if t.id not in plan1.chosen]
        table2 = EnvConfig(resources=1, vm_slots=2).build_table()
        plan2 = schedule_round(pending, q, self.model, table2, ga, now=1.0, round_index=2)
        promoted = {a.task_id: a.class_id for a in plan2.classified}
        assert promoted[2] == 1

        t2 = tasks[2]
        queued = gene_contribution(t2, queued=True, fairness_factor=0.9, now=1.0)
        plain = gene_contribution(t2, queued=False, fairness_factor=0.9, now=1.0)
        assert queued == 0.9 * plain

    def test_chosen_removed_from_queue(self):
        ts = normalized_workload(n=6)
        q = WaitingQueue(entries={t.id: 1 for t in ts})
        table = EnvConfig(resources=2, vm_slots=5).build_table()
        plan = schedule_round(list(ts), q, self.model, table, self.ga, round_index=2)
        for tid in plan.chosen:
            assert tid not in q

    def test_waiting_since_recorded(self):
        ts = normalized_workload(n=8)
        tasks = list(ts)
        table = EnvConfig(resources=1, vm_slots=2).build_table()
        ga = GaConfig(pop_size=4, chrom_len=2, max_iterations=5, seed=2)
        schedule_round(tasks, WaitingQueue(), self.model, table, ga, now=3.5)
        waiting = [t for t in tasks if t.waiting_since is not None]
        assert waiting and all(t.waiting_since == 3.5 for t in waiting)


class TestNoStarvationSmoke:
    def test_small_workload_under_scarce_slots(self):
        from cloudsched.workload import AttrRanges

        ts = normalized_workload(seed=3, n=20, ranges=AttrRanges(resource_demand=(1, 2)))
        model = exec_threshold_model()
        ga = GaConfig(pop_size=10, chrom_len=3, max_iterations=15, patience=5, seed=4)
        rep = run(ts, ProposedPolicy(model, ga), EnvConfig(resources=1, vm_slots=2))
        assert len(rep.records) == 20


class TestRoundLog:
    def test_jsonl_fields(self, tmp_path):
        ts = normalized_workload(n=20)
        model = exec_threshold_model()
        ga = GaConfig(pop_size=10, chrom_len=4, max_iterations=10, seed=6)
        policy = ProposedPolicy(model, ga)
        run(ts, policy, EnvConfig(resources=2, vm_slots=3))
        path = tmp_path / "rounds.jsonl"
        write_round_log(policy.round_log, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == len(policy.round_log)
        first = json.loads(lines[0])
        assert set(first) == {
            "round", "class_sizes", "idle", "chosen", "deferred", "unadmitted", "best_fitness",
        }
        assert set(first["class_sizes"]) == {"1", "2", "3"}
