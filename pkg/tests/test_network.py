import math

import numpy as np
import pytest

from cloudsched.network import (
    STOP_GOAL,
    STOP_GRADIENT,
    STOP_MAX_EPOCHS,
    STOP_VALIDATION,
    LabeledDataset,
    NeuralModel,
    TrainConfig,
    _batch_mse,
    _flatten,
    classify,
    forward,
    load_model,
    model_from_dict,
    model_to_dict,
    mse_and_gradient,
    new_model,
    performance,
    save_model,
    sigmoid,
    split_data,
    train,
)
from cloudsched.weighting import ParamWeights, assign_classes, derive_centroids, task_weight
from cloudsched.workload import normalize, synth_workload
from conftest import make_set, make_task


class TestSigmoid:
    def test_zero_maps_to_half(self):
        assert sigmoid(0.0) == 0.5

    def test_approaches_one(self):
        assert sigmoid(50.0) <= 1.0
        assert abs(sigmoid(50.0) - 1.0) < 1e-12

    def test_closed_form_point(self):
        assert math.isclose(sigmoid(math.log(3)), 0.75, abs_tol=1e-12)

    def test_stable_on_extreme_negatives(self):
        assert sigmoid(-1000.0) == 0.0  # underflows cleanly, no warning/overflow

    def test_vectorized(self):
        out = sigmoid(np.array([0.0, math.log(3)]))
        assert out == pytest.approx([0.5, 0.75])


def zero_model(layers):
    return NeuralModel(
        layers=tuple(layers),
        weights=[np.zeros((o, i)) for i, o in zip(layers, layers[1:])],
        biases=[np.zeros(o) for o in layers[1:]],
    )


class TestForward:
    def test_all_zero_parameters_give_half(self):
        m = zero_model((3, 20, 3))
        assert forward(m, (0.2, 0.9, 0.4)) == pytest.approx([0.5, 0.5, 0.5])

    def test_single_hidden_unit_matches_hand_computation(self):
        m = NeuralModel(
            layers=(3, 1, 3),
            weights=[np.array([[0.5, -0.25, 1.0]]), np.array([[2.0], [-1.0], [0.5]])],
            biases=[np.array([0.1]), np.array([0.0, 0.3, -0.2])],
        )
        x = (0.4, 0.8, 0.6)
        h = 1.0 / (1.0 + math.exp(-(0.5 * 0.4 - 0.25 * 0.8 + 1.0 * 0.6 + 0.1)))
        expected = [
            1.0 / (1.0 + math.exp(-(2.0 * h + 0.0))),
            1.0 / (1.0 + math.exp(-(-1.0 * h + 0.3))),
            1.0 / (1.0 + math.exp(-(0.5 * h - 0.2))),
        ]
        assert forward(m, x) == pytest.approx(expected, abs=1e-12)

    def test_outputs_strictly_inside_unit_interval(self):
        m = new_model((3, 20, 3), seed=123)
        rng = np.random.default_rng(0)
        for _ in range(50):
            out = forward(m, rng.uniform(0, 1, size=3))
            assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_dimension_mismatch(self):
        m = new_model((3, 2, 3), seed=0)
        with pytest.raises(ValueError, match="shape"):
            forward(m, (0.1, 0.2))


class TestPerformance:
    def test_zero_error(self):
        ys = [(0.1, 0.5, 0.9), (0.3, 0.3, 0.3)]
        assert performance(ys, ys) == 0.0

    def test_single_sample_unit_error(self):
        assert performance([(1.0, 0.0, 0.0)], [(0.0, 0.0, 0.0)]) == 1.0

    def test_quadratic_scaling(self):
        targets = [(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)]
        outputs = [(0.25, 0.0, 0.1), (0.9, 0.8, 1.0)]
        doubled = [
            tuple(t + 2 * (o - t) for o, t in zip(out, tgt))
            for out, tgt in zip(outputs, targets)
        ]
        assert performance(doubled, targets) == pytest.approx(4 * performance(outputs, targets))

    def test_errors(self):
        with pytest.raises(ValueError, match="outputs vs"):
            performance([(0, 0, 0)], [])
        with pytest.raises(ValueError, match="empty"):
            performance([], [])


def cluster_dataset(n_per=20, noise=0.03, seed=0):
    """Three well-separated feature clusters labeled 3/2/1 (low weight -> class 3)."""
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for center, label in [(0.1, 3), (0.5, 2), (0.9, 1)]:
        for _ in range(n_per):
            feats.append(np.clip(rng.normal(center, noise, size=3), 0.0, 1.0))
            labels.append(label)
    return LabeledDataset(features=np.array(feats), labels=np.array(labels))


class TestSplitData:
    def test_sizes_70_15_15(self):
        ds = cluster_dataset(n_per=34)  # n=102 -> trims to 100 below
        ds = LabeledDataset(features=ds.features[:100], labels=ds.labels[:100])
        tr, va, te = split_data(ds, TrainConfig(seed=1))
        assert (len(tr), len(va), len(te)) == (70, 15, 15)

    def test_residue_goes_to_train(self):
        ds = cluster_dataset(n_per=34)
        ds = LabeledDataset(features=ds.features[:101], labels=ds.labels[:101])
        tr, va, te = split_data(ds, TrainConfig(seed=1))
        assert (len(tr), len(va), len(te)) == (71, 15, 15)

    def test_deterministic_partition(self):
        ds = cluster_dataset()
        a = split_data(ds, TrainConfig(seed=9))
        b = split_data(ds, TrainConfig(seed=9))
        for x, y in zip(a, b):
            assert np.array_equal(x.features, y.features)
            assert np.array_equal(x.labels, y.labels)

    def test_union_equals_input(self):
        ds = cluster_dataset()
        parts = split_data(ds, TrainConfig(seed=2))
        rows = np.concatenate([p.features for p in parts])
        assert sorted(map(tuple, rows)) == sorted(map(tuple, ds.features))

    def test_too_small(self):
        ds = LabeledDataset(features=np.zeros((6, 3)), labels=np.ones(6, dtype=int))
        with pytest.raises(ValueError, match="too small"):
            split_data(ds, TrainConfig())


class TestTrain:
    def test_separable_clusters_reach_low_mse(self):
        ds = cluster_dataset(n_per=20)
        model = train(ds, TrainConfig(max_epochs=200, seed=3))
        assert model.log is not None
        assert model.log.records[-1].train_perf < 0.05
        assert model.log.epochs_run <= 200

    def test_max_epochs_zero_returns_untrained_model(self):
        ds = cluster_dataset()
        model = train(ds, TrainConfig(max_epochs=0, seed=1))
        assert model.log.stop_reason == STOP_MAX_EPOCHS
        assert len(model.log.records) == 1  # the initial evaluation only
        assert not model.trained

    def test_generous_goal_stops_immediately(self):
        model = train(cluster_dataset(), TrainConfig(performance_goal=10.0, seed=1))
        assert model.log.stop_reason == STOP_GOAL

    def test_huge_gradient_floor_stops(self):
        model = train(cluster_dataset(), TrainConfig(min_gradient=1e9, seed=1))
        assert model.log.stop_reason == STOP_GRADIENT

    def test_unlearnable_labels_trigger_validation_stop(self):
        rng = np.random.default_rng(7)
        ds = LabeledDataset(
            features=rng.uniform(0, 1, size=(60, 3)),
            labels=rng.integers(1, 4, size=60),
        )
        model = train(ds, TrainConfig(max_epochs=500, val_fail_limit=1, seed=11))
        assert model.log.stop_reason == STOP_VALIDATION

    def test_divergent_input_raises(self):
        ds = LabeledDataset(features=np.full((12, 3), np.nan), labels=np.ones(12, dtype=int))
        with pytest.raises(ArithmeticError, match="diverged"):
            train(ds, TrainConfig(seed=0))

    def test_stop_reason_replays_from_log(self):
        # replay the stopping rules against the recorded sequences
        for seed in (3, 11, 29):
            cfg = TrainConfig(max_epochs=120, val_fail_limit=4, seed=seed)
            model = train(cluster_dataset(seed=seed), cfg)
            log = model.log
            reason = None
            best_val = log.records[0].val_perf
            fails = 0
            for rec in log.records:
                if rec.epoch == 0:
                    continue
                if rec.val_perf >= best_val:
                    fails += 1
                else:
                    best_val = rec.val_perf
                    fails = 0
            last = log.records[-1]
            if last.epoch >= cfg.max_epochs:
                reason = STOP_MAX_EPOCHS
            elif last.train_perf <= cfg.performance_goal:
                reason = STOP_GOAL
            elif last.gradient_norm < cfg.min_gradient:
                reason = STOP_GRADIENT
            elif fails >= cfg.val_fail_limit:
                reason = STOP_VALIDATION
            assert reason == log.stop_reason

    def test_training_is_deterministic(self):
        ds = cluster_dataset()
        cfg = TrainConfig(max_epochs=50, seed=5)
        a, b = train(ds, cfg), train(ds, cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        assert [r.train_perf for r in a.log.records] == [r.train_perf for r in b.log.records]


class TestGradient:
    @staticmethod
    def finite_difference(m, x, t, h=1e-6):
        flat = _flatten(m.weights, m.biases)
        grad = np.zeros_like(flat)
        for i in range(len(flat)):
            up, down = flat.copy(), flat.copy()
            up[i] += h
            down[i] -= h
            grad[i] = (_batch_mse(m.layers, up, x, t) - _batch_mse(m.layers, down, x, t)) / (2 * h)
        return grad

    def test_analytic_gradient_matches_central_differences(self):
        rng = np.random.default_rng(17)
        m = new_model((1, 1, 1), seed=2)  # 4 parameters
        x = rng.uniform(0, 1, size=(6, 1))
        t = rng.uniform(0, 1, size=(6, 1))
        _, analytic = mse_and_gradient(m, x, t)
        numeric = self.finite_difference(m, x, t)
        rel = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
        assert rel < 1e-7


class TestClassify:
    def test_argmax_maps_to_class(self):
        m = zero_model((3, 2, 3))
        m.weights[1] = np.array([[5.0, 5.0], [0.0, 0.0], [0.0, 0.0]])
        ts = make_set([make_task(0, exec_time=0.5)])
        [a] = classify(m, ts)
        assert a.class_id == 1

    def test_tie_breaks_toward_lower_class(self):
        m = zero_model((3, 4, 3))  # every output is exactly 0.5
        ts = make_set([make_task(0)])
        [a] = classify(m, ts)
        assert a.class_id == 1
        assert a.weight == 0.5

    def test_requires_normalized_input(self):
        m = zero_model((3, 2, 3))
        ts = make_set([make_task(0)], normalized=False)
        with pytest.raises(ValueError, match="normalized"):
            classify(m, ts)

    def test_deterministic(self):
        ts = normalize(synth_workload(seed=21, n=25))
        m = new_model((3, 20, 3), seed=4)
        assert [a.class_id for a in classify(m, ts)] == [a.class_id for a in classify(m, ts)]

    @staticmethod
    def clustered_tasks(seed, n_per=30):
        rng = np.random.default_rng(seed)
        tasks = []
        for k, center in enumerate((0.12, 0.5, 0.88)):
            for i in range(n_per):
                et, c, se = np.clip(rng.normal(center, 0.04, size=3), 0.0, 1.0)
                tasks.append(make_task(k * n_per + i, exec_time=et, cost=c, sys_eff=se))
        return make_set(tasks)

    def test_agreement_with_centroid_labels_on_holdout(self):
        wp = ParamWeights()
        train_ts = self.clustered_tasks(seed=31)
        pairs = [(t.id, task_weight(t, wp)) for t in train_ts]
        centroids = derive_centroids((w for _, w in pairs), seed=1)
        labels = assign_classes(pairs, centroids, epsilon=1.0)
        model = train(
            LabeledDataset.from_assignments(train_ts, labels),
            TrainConfig(max_epochs=200, seed=6),
        )

        held = self.clustered_tasks(seed=32)
        held_pairs = [(t.id, task_weight(t, wp)) for t in held]
        expected = {a.task_id: a.class_id for a in assign_classes(held_pairs, centroids, epsilon=1.0)}
        got = classify(model, held)
        agree = sum(1 for a in got if a.class_id == expected[a.task_id])
        assert agree >= 0.9 * len(held)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        model = train(cluster_dataset(), TrainConfig(max_epochs=30, seed=8))
        path = tmp_path / "model.json"
        save_model(model, path)
        again = load_model(path)
        assert again.layers == model.layers
        for wa, wb in zip(again.weights, model.weights):
            assert np.array_equal(wa, wb)
        assert again.log.stop_reason == model.log.stop_reason
        assert len(again.log.records) == len(model.log.records)

    def test_version_check(self):
        d = model_to_dict(new_model((3, 2, 3), seed=0))
        d["format_version"] = 99
        with pytest.raises(ValueError, match="version"):
            model_from_dict(d)
