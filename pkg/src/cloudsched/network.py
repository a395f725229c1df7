"""Feedforward sigmoid classifier and its scaled-conjugate-gradient trainer.

The network maps three normalized task attributes (exec_time, cost,
sys_eff) to three class scores through sigmoid layers. Training
minimizes mean squared error against one-hot class targets and stops at
the first triggered rule: epoch cap, wall-time cap, performance goal,
gradient floor, or repeated validation worsening.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .weighting import NUM_CLASSES, TaskClassAssignment
from .workload import TaskSet

MODEL_FORMAT_VERSION = 1

STOP_MAX_EPOCHS = "max epochs"
STOP_TIME_LIMIT = "time limit"
STOP_GOAL = "performance goal"
STOP_GRADIENT = "gradient minimum"
STOP_VALIDATION = "validation worsened"


def sigmoid(net):
    """Logistic transfer 1 / (1 + e^-net); numerically stable on both tails."""
    net = np.asarray(net, dtype=float)
    out = np.empty_like(net)
    pos = net >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-net[pos]))
    e = np.exp(net[~pos])
    out[~pos] = e / (1.0 + e)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run; split ratios must sum to 1."""

    max_epochs: int = 200
    max_wall_time: float = 300.0
    performance_goal: float = 1e-4
    min_gradient: float = 1e-6
    val_fail_limit: int = 12
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0
    hidden: int = 20
    # scaled conjugate gradient constants (standard published defaults)
    sigma: float = 5e-5
    lambda0: float = 5e-7
    # trust cap on the step norm; uncapped flat-curvature steps can jump the
    # sigmoids into saturation and kill the gradient
    max_step: float = 2.0

    def __post_init__(self) -> None:
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split}")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        for name in ("max_wall_time", "performance_goal", "min_gradient"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.val_fail_limit < 1 or self.hidden < 1:
            raise ValueError("val_fail_limit and hidden must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_perf: float
    val_perf: Optional[float]
    test_perf: Optional[float]
    gradient_norm: float


@dataclass
class TrainingLog:
    """Per-epoch performance trail plus the rule that ended training."""

    records: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return self.records[-1].epoch if self.records else 0


@dataclass
class NeuralModel:
    """Layer sizes plus per-layer weight matrices / bias vectors.

    weights[l] has shape (layers[l+1], layers[l]); biases[l] has shape
    (layers[l+1],).
    """

    layers: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    log: Optional[TrainingLog] = None

    def __post_init__(self) -> None:
        if len(self.layers) < 2:
            raise ValueError("need at least an input and an output layer")
        for l, (fan_in, fan_out) in enumerate(zip(self.layers, self.layers[1:])):
            if self.weights[l].shape != (fan_out, fan_in):
                raise ValueError(
                    f"layer {l}: weight shape {self.weights[l].shape} != "
                    f"({fan_out}, {fan_in})"
                )
            if self.biases[l].shape != (fan_out,):
                raise ValueError(f"layer {l}: bias shape {self.biases[l].shape}")

    @property
    def trained(self) -> bool:
        return self.log is not None and len(self.log.records) > 1


def new_model(layers: Sequence[int], seed: int) -> NeuralModel:
    """Fresh model with uniform(-0.5, 0.5) weights and biases."""
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layers, layers[1:]):
        weights.append(rng.uniform(-0.5, 0.5, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-0.5, 0.5, size=fan_out))
    return NeuralModel(layers=tuple(int(n) for n in layers), weights=weights, biases=biases)


def forward(m: NeuralModel, features: Sequence[float]) -> np.ndarray:
    """Single forward pass; sigmoid at every non-input layer."""
    x = np.asarray(features, dtype=float)
    if x.shape != (m.layers[0],):
        raise ValueError(f"feature vector has shape {x.shape}, expected ({m.layers[0]},)")
    a = x
    for w, b in zip(m.weights, m.biases):
        a = sigmoid(w @ a + b)
    return a


def _forward_batch(weights, biases, x: np.ndarray) -> list[np.ndarray]:
    activations = [x]
    for w, b in zip(weights, biases):
        activations.append(sigmoid(activations[-1] @ w.T + b))
    return activations


def performance(outputs: Sequence[Sequence[float]], targets: Sequence[Sequence[float]]) -> float:
    """Mean over samples of the squared output-target error norm."""
    if len(outputs) != len(targets):
        raise ValueError(f"{len(outputs)} outputs vs {len(targets)} targets")
    if len(outputs) == 0:
        raise ValueError("cannot score an empty batch")
    y_hat = np.asarray(outputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    if y_hat.shape != y.shape:
        raise ValueError(f"shape mismatch: {y_hat.shape} vs {y.shape}")
    return float(np.mean(np.sum((y_hat - y) ** 2, axis=-1)))


@dataclass
class LabeledDataset:
    """Feature rows (n, input_dim) with integer class labels in 1..3."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (n, d) with one label per row")
        if len(self.labels) and not set(np.unique(self.labels)) <= set(
            range(1, NUM_CLASSES + 1)
        ):
            raise ValueError(f"labels must be in 1..{NUM_CLASSES}")

    def __len__(self) -> int:
        return len(self.labels)

    def targets(self) -> np.ndarray:
        """One-hot target matrix (n, NUM_CLASSES)."""
        t = np.zeros((len(self), NUM_CLASSES))
        t[np.arange(len(self)), self.labels - 1] = 1.0
        return t

    @classmethod
    def from_assignments(
        cls, ts: TaskSet, assignments: Sequence[TaskClassAssignment]
    ) -> "LabeledDataset":
        by_id = ts.by_id()
        feats = []
        labels = []
        for a in assignments:
            t = by_id[a.task_id]
            feats.append((t.exec_time, t.cost, t.sys_eff))
            labels.append(a.class_id)
        return cls(features=np.asarray(feats), labels=np.asarray(labels))


def split_data(
    ds: LabeledDataset, cfg: TrainConfig
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Random disjoint train/val/test partition at cfg.split ratios.

    Floor-sized validation and test splits; the rounding residue goes to
    the training split. Deterministic for a fixed cfg.seed.
    """
    n = len(ds)
    n_val = int(n * cfg.split[1])
    n_test = int(n * cfg.split[2])
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f"dataset of {n} samples too small for a {cfg.split} split"
        )
    idx = list(range(n))
    random.Random(cfg.seed).shuffle(idx)
    order = np.asarray(idx)
    parts = (
        order[:n_train],
        order[n_train : n_train + n_val],
        order[n_train + n_val :],
    )
    return tuple(
        LabeledDataset(features=ds.features[p], labels=ds.labels[p]) for p in parts
    )  # type: ignore[return-value]


# --- flat parameter vector helpers -----------------------------------------


def _flatten(weights, biases) -> np.ndarray:
    chunks = []
    for w, b in zip(weights, biases):
        chunks.append(w.ravel())
        chunks.append(b)
    return np.concatenate(chunks)


def _unflatten(layers, flat: np.ndarray):
    weights = []
    biases = []
    pos = 0
    for fan_in, fan_out in zip(layers, layers[1:]):
        weights.append(flat[pos : pos + fan_out * fan_in].reshape(fan_out, fan_in))
        pos += fan_out * fan_in
        biases.append(flat[pos : pos + fan_out])
        pos += fan_out
    return weights, biases


def mse_and_gradient(
    m: NeuralModel, features: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Batch MSE and its analytic gradient as one flat vector.

    Gradient ordering matches _flatten: (W, b) per layer, row-major.
    """
    return _loss_and_grad(m.layers, m.weights, m.biases, features, targets)


def _loss_and_grad(layers, weights, biases, x, t):
    n = len(x)
    acts = _forward_batch(weights, biases, x)
    err = acts[-1] - t
    loss = float(np.mean(np.sum(err**2, axis=1)))
    # backprop of mean-over-samples summed squared error
    delta = (2.0 / n) * err * acts[-1] * (1.0 - acts[-1])
    grads_w = []
    grads_b = []
    for l in range(len(weights) - 1, -1, -1):
        grads_w.append(delta.T @ acts[l])
        grads_b.append(delta.sum(axis=0))
        if l > 0:
            delta = (delta @ weights[l]) * acts[l] * (1.0 - acts[l])
    grads_w.reverse()
    grads_b.reverse()
    return loss, _flatten(grads_w, grads_b)


def _batch_mse(layers, flat, x, t) -> float:
    weights, biases = _unflatten(layers, flat)
    out = _forward_batch(weights, biases, x)[-1]
    return float(np.mean(np.sum((out - t) ** 2, axis=1)))


def _batch_grad(layers, flat, x, t) -> np.ndarray:
    weights, biases = _unflatten(layers, flat)
    return _loss_and_grad(layers, weights, biases, x, t)[1]


def train(ds: LabeledDataset, cfg: TrainConfig = TrainConfig()) -> NeuralModel:
    """Fit a (input, hidden, 3) sigmoid net by scaled conjugate gradient.

    The training log records epoch 0 (initial state) plus one entry per
    iteration; training stops at the first rule that fires, recorded in
    log.stop_reason.
    """
    if len(ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    train_ds, val_ds, test_ds = split_data(ds, cfg)
    layers = (ds.features.shape[1], cfg.hidden, NUM_CLASSES)
    model = new_model(layers, seed=cfg.seed)

    x_tr, t_tr = train_ds.features, train_ds.targets()
    x_va, t_va = val_ds.features, val_ds.targets()
    x_te, t_te = test_ds.features, test_ds.targets()

    w = _flatten(model.weights, model.biases)
    log = TrainingLog()

    def record(epoch: int, train_perf: float, grad_norm: float) -> None:
        log.records.append(
            EpochRecord(
                epoch=epoch,
                train_perf=train_perf,
                val_perf=_batch_mse(layers, w, x_va, t_va),
                test_perf=_batch_mse(layers, w, x_te, t_te),
                gradient_norm=grad_norm,
            )
        )

    started = time.monotonic()
    loss = _batch_mse(layers, w, x_tr, t_tr)
    grad = _batch_grad(layers, w, x_tr, t_tr)
    record(0, loss, float(np.linalg.norm(grad)))

    best_val = log.records[0].val_perf
    val_fails = 0

    # scaled conjugate gradient state
    r = -grad
    p = r.copy()
    lam = cfg.lambda0
    lam_bar = 0.0
    success = True
    n_params = len(w)
    delta_k = 0.0
    mu = 0.0

    epoch = 0
    while True:
        if not math.isfinite(loss):
            raise ArithmeticError(f"training diverged: loss={loss}")
        if epoch >= cfg.max_epochs:
            log.stop_reason = STOP_MAX_EPOCHS
            break
        if time.monotonic() - started > cfg.max_wall_time:
            log.stop_reason = STOP_TIME_LIMIT
            break
        if loss <= cfg.performance_goal:
            log.stop_reason = STOP_GOAL
            break
        if float(np.linalg.norm(r)) < cfg.min_gradient:
            log.stop_reason = STOP_GRADIENT
            break
        if val_fails >= cfg.val_fail_limit:
            log.stop_reason = STOP_VALIDATION
            break

        epoch += 1
        p_norm_sq = float(p @ p)
        if success:
            # second-order information along p via a gradient probe
            sigma_k = cfg.sigma / math.sqrt(p_norm_sq)
            grad_probe = _batch_grad(layers, w + sigma_k * p, x_tr, t_tr)
            s = (grad_probe - grad) / sigma_k
            delta_k = float(p @ s)
        delta_k += (lam - lam_bar) * p_norm_sq
        if delta_k <= 0:  # force the Hessian estimate positive definite
            lam_bar = 2.0 * (lam - delta_k / p_norm_sq)
            delta_k = -delta_k + lam * p_norm_sq
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta_k
        step_norm = abs(alpha) * math.sqrt(p_norm_sq)
        if step_norm > cfg.max_step:
            alpha *= cfg.max_step / step_norm
        loss_new = _batch_mse(layers, w + alpha * p, x_tr, t_tr)
        comparison = 2.0 * delta_k * (loss - loss_new) / (mu * mu)

        if comparison >= 0:
            w = w + alpha * p
            loss = loss_new
            grad = _batch_grad(layers, w, x_tr, t_tr)
            r_new = -grad
            lam_bar = 0.0
            success = True
            if epoch % n_params == 0:
                p = r_new.copy()  # periodic restart along steepest descent
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam = 0.25 * lam
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam += delta_k * (1.0 - comparison) / p_norm_sq

        record(epoch, loss, float(np.linalg.norm(r)))
        val_perf = log.records[-1].val_perf
        if val_perf >= best_val:
            val_fails += 1
        else:
            best_val = val_perf
            val_fails = 0

    model.weights, model.biases = _unflatten(layers, w)
    model.log = log
    return model


def classify(m: NeuralModel, tasks: TaskSet) -> list[TaskClassAssignment]:
    """Class per task = argmax of the forward pass, ties toward class 1."""
    if not tasks.normalized:
        raise ValueError("classify requires a normalized task set")
    out = []
    for t in tasks:
        scores = forward(m, (t.exec_time, t.cost, t.sys_eff))
        idx = int(np.argmax(scores))  # argmax returns the first maximal index
        out.append(
            TaskClassAssignment(task_id=t.id, class_id=idx + 1, weight=float(scores[idx]))
        )
    return out


# --- serialization ----------------------------------------------------------


def model_to_dict(m: NeuralModel) -> dict:
    d: dict = {
        "format_version": MODEL_FORMAT_VERSION,
        "layers": list(m.layers),
        "weights": [w.tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
    }
    if m.log is not None:
        d["training"] = {
            "stop_reason": m.log.stop_reason,
            "epochs_run": m.log.epochs_run,
            "records": [
                {
                    "epoch": r.epoch,
                    "train_perf": r.train_perf,
                    "val_perf": r.val_perf,
                    "test_perf": r.test_perf,
                    "gradient_norm": r.gradient_norm,
                }
                for r in m.log.records
            ],
        }
    return d


def model_from_dict(d: dict) -> NeuralModel:
    version = d.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version}")
    log = None
    if "training" in d:
        log = TrainingLog(
            records=[EpochRecord(**r) for r in d["training"]["records"]],
            stop_reason=d["training"]["stop_reason"],
        )
    return NeuralModel(
        layers=tuple(d["layers"]),
        weights=[np.asarray(w, dtype=float) for w in d["weights"]],
        biases=[np.asarray(b, dtype=float) for b in d["biases"]],
        log=log,
    )


def save_model(m: NeuralModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> NeuralModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
